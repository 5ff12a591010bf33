#include "llmtaxo/http.hpp"

#include <httplib.h>

#include "llmtaxo/error.hpp"

namespace llmtaxo {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint is not an absolute URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const HttpHeaders& headers, double timeout_seconds) {
  auto parts = split_url(url);
  httplib::Client client(parts.origin);
  if (!client.is_valid()) throw ConfigError("unsupported endpoint: " + url);
  auto secs = static_cast<time_t>(timeout_seconds);
  auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers hs;
  for (const auto& [k, v] : headers) hs.emplace(k, v);
  auto res = client.Post(parts.path, hs, body, "application/json");
  if (!res) {
    throw ProviderUnavailable(url + ": " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

}  // namespace llmtaxo
