#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "flyhash/error.hpp"

namespace flyhash::cli {

namespace {

struct MdCtxFree {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned i = 0; i < n; ++i) {
    out.push_back(digits[d[i] >> 4]);
    out.push_back(digits[d[i] & 15]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error(ErrorCode::kIo, "cannot initialise SHA-256");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string finish() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &n);
    return hex(md.data(), n);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxFree> ctx_;
};

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

void RunManifest::add_input(const std::filesystem::path& p) {
  inputs.emplace_back(p.string(), sha256_file(p));
}

void RunManifest::add_artifact(const std::filesystem::path& p, bool reproducible) {
  artifacts.emplace_back(p.string(), reproducible ? sha256_file(p) : std::string());
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version;
  j["seed"] = seed;
  j["cwd"] = cwd;
  j["argv"] = argv;
  j["config"] = config;
  auto pairs = [](const auto& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : v) {
      nlohmann::ordered_json e;
      e["path"] = path;
      e["sha256"] = digest.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(digest);
      a.push_back(e);
    }
    return a;
  };
  j["inputs"] = pairs(inputs);
  j["artifacts"] = pairs(artifacts);
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.cwd = j.at("cwd").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.at("config");
  auto pairs = [](const nlohmann::json& a) {
    std::vector<std::pair<std::string, std::string>> v;
    for (const auto& e : a)
      v.emplace_back(e.at("path").get<std::string>(),
                     e.at("sha256").is_null() ? std::string() : e.at("sha256").get<std::string>());
    return v;
  };
  m.inputs = pairs(j.at("inputs"));
  m.artifacts = pairs(j.at("artifacts"));
  return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, "malformed manifest " + path.string() + ": " + e.what());
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return artifact.string() + ".manifest.json";
}

}  // namespace flyhash::cli
