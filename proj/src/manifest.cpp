#include "surt/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "surt/errors.hpp"

namespace surt {

namespace {

std::string hex_of(const unsigned char* digest, unsigned int len) {
  static const char* kHex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0x0f];
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      fail(ErrorCode::NumericalFailure, "cannot initialize SHA-256");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_, data, size) != 1)
      fail(ErrorCode::NumericalFailure, "SHA-256 update failed");
  }
  std::string finish() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, digest, &len) != 1)
      fail(ErrorCode::NumericalFailure, "SHA-256 finalization failed");
    return hex_of(digest, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

const char* library_version() { return "0.3.0"; }

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 h;
  if (size > 0) h.update(data, size);
  return h.finish();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    if (got > 0) h.update(buf, static_cast<std::size_t>(got));
  }
  if (in.bad()) fail(ErrorCode::IoError, "read failure on " + path);
  return h.finish();
}

std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : m.inputs)
    inputs.push_back({{"path", in.path}, {"sha256", in.sha256}});
  nlohmann::json j{{"command", m.command},
                   {"config", m.resolved_config},
                   {"inputs", inputs},
                   {"seed", m.seed},
                   {"started_at", m.started_at},
                   {"finished_at", m.finished_at},
                   {"artifacts", m.artifacts},
                   {"version", m.version}};
  if (!m.error.empty()) j["error"] = m.error;
  return j;
}

void write_manifest(const std::string& outdir, const RunManifest& m) {
  const std::string path = outdir + "/manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << manifest_json(m).dump(2) << "\n";
  if (!out) fail(ErrorCode::IoError, "write failure on " + path);
}

}  // namespace surt
