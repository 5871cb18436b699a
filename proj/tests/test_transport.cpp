#include <doctest.h>

#include <random>
#include <sstream>

#include "polaudit/transport.hpp"
#include "support/lp_oracle.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"

using namespace polaudit;

namespace {

// Random vocabulary of `n_words` vectors in dim `dim`, plus helpers to make
// random distributions over subsets of it.
struct RandomVocab {
  WordVectors wv;

  RandomVocab(std::size_t n_words, std::size_t dim, std::uint32_t seed) {
    std::mt19937 rng(seed);
    wv.dim = dim;
    for (std::size_t i = 0; i < n_words; ++i) {
      wv.vocab.emplace("w" + std::to_string(i), i);
      for (std::size_t k = 0; k < dim; ++k)
        wv.matrix.push_back(oracle::uniform01(rng));
    }
  }

  DocDistribution random_dist(std::size_t max_words, std::mt19937& rng) const {
    std::size_t n = 1 + rng() % max_words;
    std::set<std::size_t> chosen;
    while (chosen.size() < n) chosen.insert(rng() % wv.size());
    DocDistribution d;
    double total = 0;
    std::vector<double> raw;
    for (std::size_t idx : chosen) {
      d.indices.push_back(idx);
      double w = 0.05 + oracle::uniform01(rng);
      raw.push_back(w);
      total += w;
    }
    for (double w : raw) d.weights.push_back(w / total);
    return d;
  }
};

double oracle_wmd(const DocDistribution& p, const DocDistribution& q,
                  const WordVectors& wv) {
  std::vector<std::vector<double>> cost(p.size(), std::vector<double>(q.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j)
      cost[i][j] = wv.euclidean(p.indices[i], q.indices[j]);
  return oracle::transport_lp(p.weights, q.weights, cost);
}

}  // namespace

TEST_CASE("LP oracle solves a hand-checked transportation problem") {
  // Supplies (0.5, 0.5), demands (0.5, 0.5), cheap diagonal: optimum ships
  // along the diagonal at cost 0.5*1 + 0.5*2 = 1.5.
  std::vector<std::vector<double>> cost = {{1, 10}, {10, 2}};
  double obj = oracle::transport_lp({0.5, 0.5}, {0.5, 0.5}, cost);
  CHECK(obj == doctest::Approx(1.5).epsilon(1e-12));
  // Crossing shipment forced: supplies (1,0) must reach demand (0,1).
  double forced = oracle::transport_lp({1.0, 0.0}, {0.0, 1.0}, cost);
  CHECK(forced == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("single-word documents reduce to the Euclidean distance") {
  testutil::TmpDir tmp;
  auto wv = load_word_vectors(tmp.file("v.vec", "2 2\ncat 0 0\ndog 3 4\n").string());
  DocDistribution p{{*wv.index_of("cat")}, {1.0}};
  DocDistribution q{{*wv.index_of("dog")}, {1.0}};
  CHECK(wmd(p, q, wv) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(relaxed_wmd(p, q, wv) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(wmd(p, p, wv) == 0.0);
  CHECK(relaxed_wmd(q, q, wv) == 0.0);
  DocDistribution empty;
  CHECK_THROWS_AS(wmd(empty, q, wv), InputError);
}

TEST_CASE("exact solver matches the dense LP oracle on random pairs") {
  RandomVocab vocab(12, 5, 42);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    auto p = vocab.random_dist(4, rng);
    auto q = vocab.random_dist(4, rng);
    double exact = wmd(p, q, vocab.wv);
    double reference = oracle_wmd(p, q, vocab.wv);
    INFO("trial " << trial);
    CHECK(exact == doctest::Approx(reference).epsilon(1e-9));
    CHECK(relaxed_wmd(p, q, vocab.wv) <= exact + 1e-9);
  }
}

TEST_CASE("wmd is a metric on random distributions") {
  RandomVocab vocab(10, 4, 3);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto a = vocab.random_dist(4, rng);
    auto b = vocab.random_dist(4, rng);
    auto c = vocab.random_dist(4, rng);
    double ab = wmd(a, b, vocab.wv);
    double ba = wmd(b, a, vocab.wv);
    double ac = wmd(a, c, vocab.wv);
    double cb = wmd(c, b, vocab.wv);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(ab <= ac + cb + 1e-7);
  }
}

TEST_CASE("larger unbalanced-support cases still match the oracle") {
  RandomVocab vocab(20, 3, 17);
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = vocab.random_dist(7, rng);
    auto q = vocab.random_dist(3, rng);
    CHECK(wmd(p, q, vocab.wv) ==
          doctest::Approx(oracle_wmd(p, q, vocab.wv)).epsilon(1e-9));
  }
  // Wider supports in one shot.
  RandomVocab big(40, 4, 99);
  auto p = big.random_dist(20, rng);
  auto q = big.random_dist(15, rng);
  CHECK(wmd(p, q, big.wv) ==
        doctest::Approx(oracle_wmd(p, q, big.wv)).epsilon(1e-9));
}

TEST_CASE("degenerate cost structure (all words equidistant) stays exact") {
  // Vocabulary on the vertices of a scaled simplex: every pair of distinct
  // words is the same distance apart, so pivots tie heavily.
  WordVectors wv;
  wv.dim = 6;
  for (std::size_t i = 0; i < 6; ++i) {
    wv.vocab.emplace("w" + std::to_string(i), i);
    for (std::size_t k = 0; k < 6; ++k) wv.matrix.push_back(i == k ? 2.0 : 0.0);
  }
  std::mt19937 rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    DocDistribution p, q;
    p.indices = {0, 1, 2};
    q.indices = {2, 3, 4, 5};
    double pw[3] = {1 + double(rng() % 5), 1 + double(rng() % 5),
                    1 + double(rng() % 5)};
    double qw[4] = {1 + double(rng() % 5), 1 + double(rng() % 5),
                    1 + double(rng() % 5), 1 + double(rng() % 5)};
    double ps = pw[0] + pw[1] + pw[2];
    double qs = qw[0] + qw[1] + qw[2] + qw[3];
    for (double w : pw) p.weights.push_back(w / ps);
    for (double w : qw) q.weights.push_back(w / qs);
    // Closed form: shared word 2 absorbs overlap free of charge; the rest
    // moves across one simplex edge of length 2*sqrt(2).
    double overlap = std::min(p.weights[2], q.weights[0]);
    double expected = (1.0 - overlap) * 2.0 * std::sqrt(2.0);
    CHECK(wmd(p, q, wv) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(wmd(p, q, wv) ==
          doctest::Approx(oracle_wmd(p, q, wv)).epsilon(1e-9));
  }
}

TEST_CASE("truncate_distribution keeps the heaviest types") {
  DocDistribution d;
  d.indices = {0, 1, 2, 3};
  d.weights = {0.1, 0.4, 0.2, 0.3};
  CHECK(!truncate_distribution(d, 4));
  CHECK(truncate_distribution(d, 2));
  REQUIRE(d.size() == 2);
  CHECK(d.indices == std::vector<std::size_t>{1, 3});
  CHECK(d.weights[0] == doctest::Approx(0.4 / 0.7));
  CHECK(d.weights[1] == doctest::Approx(0.3 / 0.7));
}

TEST_CASE("pairwise distances: symmetry, zero diagonal, per-pair agreement") {
  RandomVocab vocab(15, 4, 5);
  std::mt19937 rng(29);
  std::vector<std::string> ids;
  std::vector<DocDistribution> docs;
  for (int i = 0; i < 5; ++i) {
    ids.push_back("d" + std::to_string(i));
    docs.push_back(vocab.random_dist(5, rng));
  }
  auto dm = pairwise_distances(ids, docs, vocab.wv);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(dm.at(i, i) == 0.0);
    for (std::size_t j = i + 1; j < 5; ++j) {
      CHECK(dm.at(i, j) == doctest::Approx(dm.at(j, i)).epsilon(1e-12));
      CHECK(dm.at(i, j) ==
            doctest::Approx(wmd(docs[i], docs[j], vocab.wv)).epsilon(1e-9));
    }
  }
  CHECK(dm.approximate_pairs.empty());

  SUBCASE("identical documents give an all-zero matrix") {
    std::vector<DocDistribution> same = {docs[0], docs[0], docs[0]};
    auto zero = pairwise_distances({"a", "b", "c"}, same, vocab.wv);
    for (double v : zero.values) CHECK(v == 0.0);
  }

  SUBCASE("empty distributions are excluded and tallied") {
    std::vector<DocDistribution> with_empty = {docs[0], DocDistribution{},
                                               docs[1]};
    auto dm2 = pairwise_distances({"a", "empty", "b"}, with_empty, vocab.wv);
    CHECK(dm2.ids == std::vector<std::string>{"a", "b"});
    CHECK(dm2.excluded_ids == std::vector<std::string>{"empty"});
    CHECK(dm2.at(0, 1) ==
          doctest::Approx(wmd(docs[0], docs[1], vocab.wv)).epsilon(1e-9));
  }

  SUBCASE("prefilter with infinite cutoff changes nothing") {
    TransportConfig cfg;
    cfg.prefilter_cutoff = std::numeric_limits<double>::infinity();
    auto dm2 = pairwise_distances(ids, docs, vocab.wv, cfg);
    CHECK(dm2.values == dm.values);
    CHECK(dm2.approximate_pairs.empty());
  }

  SUBCASE("prefilter records bounds for skipped pairs") {
    TransportConfig cfg;
    cfg.prefilter_cutoff = 0.0;  // everything positive is skipped
    auto dm2 = pairwise_distances(ids, docs, vocab.wv, cfg);
    CHECK(dm2.approximate_pairs.size() == 10);
    for (auto [i, j] : dm2.approximate_pairs)
      CHECK(dm2.at(i, j) <= dm.at(i, j) + 1e-9);  // bounds never exceed exact
  }

  SUBCASE("permutation equivariance in document order") {
    std::vector<std::string> rids = {ids[3], ids[1], ids[4], ids[0], ids[2]};
    std::vector<DocDistribution> rdocs = {docs[3], docs[1], docs[4], docs[0],
                                          docs[2]};
    auto rdm = pairwise_distances(rids, rdocs, vocab.wv);
    std::size_t perm[5] = {3, 1, 4, 0, 2};
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(rdm.at(i, j) ==
              doctest::Approx(dm.at(perm[i], perm[j])).epsilon(1e-9));
  }
}

TEST_CASE("normalize_similarities endpoints, affine invariance, monotonicity") {
  DistanceMatrix d;
  d.ids = {"a", "b", "c"};
  d.values = {0,   0.2, 0.6,
              0.2, 0,   1.0,
              0.6, 1.0, 0};
  auto s = normalize_similarities(d);
  CHECK(s.at(0, 1) == doctest::Approx(1.0));
  CHECK(s.at(0, 2) == doctest::Approx(0.5));
  CHECK(s.at(1, 2) == doctest::Approx(0.0));
  CHECK(s.at(0, 0) == 1.0);

  SUBCASE("adding a constant off-diagonal leaves similarities unchanged") {
    DistanceMatrix shifted = d;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) shifted.values[i * 3 + j] += 5.0;
    auto s2 = normalize_similarities(shifted);
    for (std::size_t i = 0; i < 9; ++i)
      CHECK(s2.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));
  }

  SUBCASE("ordering of similarities reverses the distance ordering") {
    std::mt19937 rng(31);
    DistanceMatrix r;
    r.ids = {"a", "b", "c", "d", "e", "f"};
    r.values.assign(36, 0.0);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) {
        double v = oracle::uniform01(rng);
        r.values[i * 6 + j] = v;
        r.values[j * 6 + i] = v;
      }
    auto rs = normalize_similarities(r);
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = a + 1; b < 6; ++b)
        for (std::size_t c = 0; c < 6; ++c)
          for (std::size_t e = c + 1; e < 6; ++e) {
            if (r.at(a, b) < r.at(c, e)) CHECK(rs.at(a, b) > rs.at(c, e));
          }
  }

  SUBCASE("constant off-diagonal matrix is degenerate") {
    DistanceMatrix flat;
    flat.ids = {"a", "b", "c"};
    flat.values = {0, 1, 1, 1, 0, 1, 1, 1, 0};
    CHECK_THROWS_AS(normalize_similarities(flat), DegenerateInputError);
  }
}

TEST_CASE("matrix CSV round-trip preserves ids and values") {
  DistanceMatrix d;
  d.ids = {"p1", "p2", "p3"};
  d.values = {0, 0.125, 2.5, 0.125, 0, 1e-3, 2.5, 1e-3, 0};
  std::ostringstream csv;
  save_distance_matrix(d, csv);
  std::istringstream in(csv.str());
  auto d2 = load_distance_matrix(in);
  CHECK(d2.ids == d.ids);
  CHECK(d2.values == d.values);
  std::istringstream bad("ids,a,b\na,0\n");
  CHECK_THROWS_AS(load_distance_matrix(bad), ParseError);
}
