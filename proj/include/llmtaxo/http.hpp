#pragma once

#include <string>
#include <utility>
#include <vector>

namespace llmtaxo {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// POST a JSON body to an absolute http(s) URL. Throws ProviderUnavailable when
/// the request cannot be delivered (DNS, connect, timeout). Any HTTP status is
/// returned to the caller.
HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const HttpHeaders& headers, double timeout_seconds);

/// 408, 429 and 5xx are worth retrying.
inline bool is_transient_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace llmtaxo
