#include "densctl/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <sstream>

#include "densctl/error.hpp"

namespace densctl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string content_hash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx.get(), header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx.get(), digest, &len) == 1;
  require(ok, ErrorKind::State, "sha1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : std::span(digest, len)) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ArtifactRef make_ref(const fs::path& file, const fs::path& base) {
  const std::string bytes = slurp(file);
  std::string shown = file.string();
  if (!base.empty()) {
    const fs::path rel = fs::weakly_canonical(file).lexically_relative(fs::weakly_canonical(base));
    if (!rel.empty() && *rel.begin() != "..") shown = rel.generic_string();
  }
  return {shown, content_hash(bytes), bytes.size()};
}

json refs_to_json(const std::map<std::string, ArtifactRef>& refs) {
  json out = json::object();
  for (const auto& [role, r] : refs) out[role] = {{"path", r.path}, {"sha1", r.sha1}, {"bytes", r.bytes}};
  return out;
}

std::map<std::string, ArtifactRef> refs_from_json(const json& j) {
  std::map<std::string, ArtifactRef> out;
  for (const auto& [role, r] : j.items()) {
    out[role] = {r.at("path").get<std::string>(), r.at("sha1").get<std::string>(), r.at("bytes").get<std::uintmax_t>()};
  }
  return out;
}

}  // namespace

std::string file_hash(const fs::path& path) { return content_hash(slurp(path)); }

void RunManifest::add_input(const std::string& role, const fs::path& file, const fs::path& base) {
  inputs[role] = make_ref(file, base);
}

void RunManifest::add_output(const std::string& role, const fs::path& file, const fs::path& base) {
  outputs[role] = make_ref(file, base);
}

json RunManifest::to_json() const {
  return {{"format", kFormat},   {"command", command}, {"seed", seed},         {"config", config},
          {"inputs", refs_to_json(inputs)}, {"outputs", refs_to_json(outputs)}, {"metrics", metrics},
          {"timestamps", timestamps}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    require(j.at("format").get<int>() == kFormat, ErrorKind::Format, "unsupported manifest format");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    m.inputs = refs_from_json(j.at("inputs"));
    m.outputs = refs_from_json(j.at("outputs"));
    m.metrics = j.at("metrics");
    m.timestamps = j.value("timestamps", json::object());
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed manifest: ") + e.what());
  }
}

void RunManifest::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

RunManifest RunManifest::read(const fs::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, "'" + path.string() + "' is not JSON: " + e.what());
  }
  return from_json(j);
}

bool RunManifest::same_run(const RunManifest& other) const {
  json a = to_json(), b = other.to_json();
  a.erase("timestamps");
  b.erase("timestamps");
  return a.dump() == b.dump();
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace densctl
