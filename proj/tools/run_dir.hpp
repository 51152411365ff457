#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include <json.hpp>

#include "utd/errors.hpp"

namespace utd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.3.1";

namespace detail {

inline std::string sha256_stream(std::istream& in) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace detail

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read " + path.string());
  return detail::sha256_stream(in);
}

inline std::string sha256_text(const std::string& text) {
  std::istringstream in(text);
  return detail::sha256_stream(in);
}

inline std::string utc_stamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

// A run directory <out>/<subcommand>-<UTC stamp>[-k] holding the artifacts
// and manifest.json. The manifest starts "incomplete" and is only marked
// "complete" by finish().
class RunDir {
 public:
  RunDir(const fs::path& out, const std::string& subcommand, const json& config) : subcommand_(subcommand) {
    fs::create_directories(out);
    const std::string base = subcommand + "-" + utc_stamp("%Y%m%dT%H%M%SZ");
    path_ = out / base;
    for (int k = 1; fs::exists(path_); ++k) path_ = out / (base + "-" + std::to_string(k));
    fs::create_directories(path_);
    manifest_ = {{"subcommand", subcommand},
                 {"version", kVersion},
                 {"status", "incomplete"},
                 {"started", utc_stamp("%Y-%m-%dT%H:%M:%SZ")},
                 {"config", config},
                 {"seeds", config.contains("seeds") ? config["seeds"] : json::object()},
                 {"files", json::object()}};
    write_manifest();
  }

  const fs::path& path() const { return path_; }
  fs::path file(const std::string& name) const { return path_ / name; }

  // Registers an artifact written into the run directory.
  void add(const std::string& name) { files_.insert(name); }

  void set(const std::string& key, json value) {
    manifest_[key] = std::move(value);
    write_manifest();
  }

  void fail(const std::string& message) {
    manifest_["error"] = message;
    hash_files();
    write_manifest();
  }

  void finish() {
    hash_files();
    manifest_["status"] = "complete";
    manifest_["finished"] = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
    write_manifest();
  }

 private:
  void hash_files() {
    json files = json::object();
    for (const auto& name : files_)
      if (fs::exists(file(name))) files[name] = sha256_file(file(name));
    manifest_["files"] = files;
  }

  void write_manifest() const {
    const fs::path tmp = file("manifest.json.tmp");
    {
      std::ofstream out(tmp);
      out << manifest_.dump(2) << '\n';
    }
    fs::rename(tmp, file("manifest.json"));
  }

  std::string subcommand_;
  fs::path path_;
  json manifest_;
  std::set<std::string> files_;
};

}  // namespace utd::cli
