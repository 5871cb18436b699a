#pragma once

#include <netdb.h>
#include <sys/socket.h>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "polaudit/errors.hpp"
#include "polaudit/url.hpp"

namespace polaudit {

struct PolitenessConfig {
  double min_delay_seconds = 1.0;  // per host
  int retries = 2;                 // transport-level retries
  double timeout_seconds = 15.0;
  std::string user_agent = "polaudit/0.1 (batch privacy-policy audit)";
  unsigned workers = 4;
};

struct FetchResult {
  std::string url;
  int status = 0;            // HTTP status; 0 when `error` is set
  std::string error;         // symbolic: dns_error, connect_error, timeout,
                             // tls_error, read_error, unsupported_scheme,
                             // invalid_url
  std::optional<std::string> body;  // present iff status is 2xx
  std::chrono::system_clock::time_point fetched_at;
  std::optional<std::string> content_type;
};

struct CrawlLogEntry {
  std::string host;
  std::string url;
  std::chrono::steady_clock::time_point started_at;
};

namespace detail {

inline bool host_resolves(const std::string& host) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = getaddrinfo(host.c_str(), nullptr, &hints, &res);
  if (res) freeaddrinfo(res);
  return rc == 0;
}

inline std::string map_httplib_error(httplib::Error err) {
  switch (err) {
    case httplib::Error::Connection:
    case httplib::Error::BindIPAddress:
      return "connect_error";
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
    case httplib::Error::Write:
      return "timeout";
    case httplib::Error::SSLConnection:
    case httplib::Error::SSLLoadingCerts:
    case httplib::Error::SSLServerVerification:
#if defined(CPPHTTPLIB_OPENSSL_SUPPORT) && CPPHTTPLIB_VERSION_NUM >= 1400
    case httplib::Error::SSLServerHostnameVerification:
#endif
      return "tls_error";
    case httplib::Error::ExceedRedirectCount:
      return "read_error";
    default:
      return "connect_error";
  }
}

}  // namespace detail

// Polite HTTP fetcher: per-host minimum delay, bounded retries, timeouts
// mapped to symbolic codes. Errors never escape as exceptions from fetch().
class Fetcher {
public:
  explicit Fetcher(PolitenessConfig cfg = {}) : cfg_(std::move(cfg)) {}

  FetchResult fetch(const std::string& url_string) {
    FetchResult result;
    result.url = url_string;
    result.fetched_at = std::chrono::system_clock::now();
    auto parsed = try_parse_url(url_string);
    if (!parsed || !parsed->is_http()) {
      result.error = "invalid_url";
      return result;
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (parsed->scheme == "https") {
      result.error = "tls_error";
      return result;
    }
#endif
    if (!detail::host_resolves(parsed->host)) {
      honor_delay(parsed->host);  // counts against the host budget anyway
      result.error = "dns_error";
      return result;
    }

    std::string last_error = "connect_error";
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      honor_delay(parsed->host);
      log_request(*parsed, url_string);
      httplib::Client client(parsed->scheme + "://" + parsed->authority());
      client.set_connection_timeout(std::chrono::milliseconds(
          static_cast<long>(cfg_.timeout_seconds * 1000)));
      client.set_read_timeout(std::chrono::milliseconds(
          static_cast<long>(cfg_.timeout_seconds * 1000)));
      client.set_default_headers({{"User-Agent", cfg_.user_agent}});
      client.set_follow_location(true);
      std::string target = parsed->path;
      if (!parsed->query.empty()) target += "?" + parsed->query;
      auto response = client.Get(target);
      result.fetched_at = std::chrono::system_clock::now();
      if (response) {
        result.status = response->status;
        if (response->status >= 200 && response->status < 300)
          result.body = response->body;
        if (response->has_header("Content-Type"))
          result.content_type = response->get_header_value("Content-Type");
        result.error.clear();
        return result;
      }
      last_error = detail::map_httplib_error(response.error());
    }
    result.status = 0;
    result.error = last_error;
    return result;
  }

  // Concurrent across hosts, serialized within one host: each worker owns
  // whole host groups. Result order matches the input order.
  std::vector<FetchResult> crawl(const std::vector<std::string>& urls) {
    std::vector<FetchResult> results(urls.size());
    std::map<std::string, std::vector<std::size_t>> by_host;
    std::vector<std::size_t> invalid;
    for (std::size_t i = 0; i < urls.size(); ++i) {
      auto parsed = try_parse_url(urls[i]);
      if (parsed && parsed->is_http())
        by_host[parsed->host].push_back(i);
      else
        invalid.push_back(i);
    }
    for (std::size_t i : invalid) {
      results[i].url = urls[i];
      results[i].error = "invalid_url";
      results[i].fetched_at = std::chrono::system_clock::now();
    }
    std::deque<std::vector<std::size_t>> queue;
    for (auto& [host, idx] : by_host) queue.push_back(idx);
    std::mutex queue_mutex;
    auto work = [&]() {
      for (;;) {
        std::vector<std::size_t> group;
        {
          std::lock_guard<std::mutex> lock(queue_mutex);
          if (queue.empty()) return;
          group = std::move(queue.front());
          queue.pop_front();
        }
        for (std::size_t i : group) results[i] = fetch(urls[i]);
      }
    };
    unsigned workers = std::max(1u, cfg_.workers);
    workers = std::min<unsigned>(workers, static_cast<unsigned>(by_host.size()));
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    return results;
  }

  std::vector<CrawlLogEntry> session_log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
  }

private:
  void honor_delay(const std::string& host) {
    std::chrono::steady_clock::time_point wait_until;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto now = std::chrono::steady_clock::now();
      auto it = last_request_.find(host);
      auto delay = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(cfg_.min_delay_seconds));
      wait_until = (it == last_request_.end()) ? now : it->second + delay;
      last_request_[host] = std::max(wait_until, now);
    }
    std::this_thread::sleep_until(wait_until);
    std::lock_guard<std::mutex> lock(mutex_);
    last_request_[host] = std::chrono::steady_clock::now();
  }

  void log_request(const Url& url, const std::string& raw) {
    std::lock_guard<std::mutex> lock(mutex_);
    log_.push_back({url.host, raw, std::chrono::steady_clock::now()});
  }

  PolitenessConfig cfg_;
  mutable std::mutex mutex_;
  std::map<std::string, std::chrono::steady_clock::time_point> last_request_;
  std::vector<CrawlLogEntry> log_;
};

}  // namespace polaudit
