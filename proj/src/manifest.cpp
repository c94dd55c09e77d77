#include "factmatch/manifest.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "factmatch/error.hpp"

namespace factmatch::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class Sha256 {
  public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
            EVP_MD_CTX_free(ctx_);
            throw Error("sha256: digest init failed");
        }
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const char* data, std::size_t n)
    {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) {
            throw Error("sha256: update failed");
        }
    }

    std::string hex()
    {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) {
            throw Error("sha256: final failed");
        }
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 0xF];
        }
        return out;
    }

  private:
    EVP_MD_CTX* ctx_;
};

ordered_json digest_json(const FileDigest& d)
{
    ordered_json j;
    j["path"] = d.path;
    j["sha256"] = d.sha256;
    j["bytes"] = d.bytes;
    return j;
}

FileDigest digest_from(const json& j)
{
    return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>(), j.at("bytes").get<std::uintmax_t>()};
}

}  // namespace

std::string sha256_hex(std::string_view data)
{
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

FileDigest digest_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError(path.string());
    }
    Sha256 h;
    FileDigest d;
    d.path = path.string();
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        const auto got = static_cast<std::size_t>(in.gcount());
        h.update(buf, got);
        d.bytes += got;
    }
    d.sha256 = h.hex();
    return d;
}

std::string new_run_id(Timestamp now)
{
    static std::atomic<std::uint32_t> counter{0};
    static const std::uint32_t salt = std::random_device{}();
    const auto stamp = format_rfc3339(now);  // YYYY-MM-DDTHH:MM:SSZ
    std::string compact;
    for (char c : stamp) {
        if (c != '-' && c != ':') {
            compact += c;
        }
    }
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%08x", salt ^ (counter.fetch_add(1) * 0x9E3779B9u));
    return compact + "-" + suffix;
}

void RunManifest::add_input(const std::filesystem::path& path)
{
    inputs.push_back(digest_file(path));
}

void RunManifest::add_output(const std::filesystem::path& path)
{
    outputs.push_back(digest_file(path));
}

ordered_json RunManifest::to_json() const
{
    ordered_json j;
    j["run_id"] = run_id;
    j["command"] = command;
    j["config"] = config;
    ordered_json in = ordered_json::array();
    for (const auto& d : inputs) {
        in.push_back(digest_json(d));
    }
    j["inputs"] = std::move(in);
    ordered_json out = ordered_json::array();
    for (const auto& d : outputs) {
        out.push_back(digest_json(d));
    }
    j["outputs"] = std::move(out);
    j["counts"] = counts;
    j["started_at"] = format_rfc3339(started_at);
    j["finished_at"] = format_rfc3339(finished_at);
    return j;
}

RunManifest RunManifest::from_json(const json& j)
{
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.config = ordered_json::parse(j.at("config").dump());
        for (const auto& d : j.at("inputs")) {
            m.inputs.push_back(digest_from(d));
        }
        for (const auto& d : j.at("outputs")) {
            m.outputs.push_back(digest_from(d));
        }
        m.counts = ordered_json::parse(j.at("counts").dump());
        auto started = parse_rfc3339(j.at("started_at").get<std::string>());
        auto finished = parse_rfc3339(j.at("finished_at").get<std::string>());
        if (!started || !finished) {
            throw InvalidArgument("manifest: bad timestamp");
        }
        m.started_at = *started;
        m.finished_at = *finished;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("manifest: ") + e.what());
    }
    return m;
}

void RunManifest::write(const std::filesystem::path& path) const
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write manifest " + path.string());
    }
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError(path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(json::parse(ss.str()));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

std::vector<std::string> RunManifest::changed_inputs() const
{
    std::vector<std::string> changed;
    for (const auto& d : inputs) {
        try {
            if (digest_file(d.path).sha256 != d.sha256) {
                changed.push_back(d.path);
            }
        } catch (const MissingFileError&) {
            changed.push_back(d.path);
        }
    }
    return changed;
}

}  // namespace factmatch::app
