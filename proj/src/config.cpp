#include "msde/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace msde {

namespace {

[[noreturn]] void usage_error(const std::string& msg) { throw Error(Module::Cli, ErrorKind::Usage, msg); }

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        usage_error(fmt::format("config value '{}' for '{}' is not a valid number", v, key));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    usage_error(fmt::format("config value '{}' for '{}' is not a boolean", v, key));
}

std::string normalize_key(std::string_view key) {
    std::string k(key);
    for (auto& c : k)
        if (c == '-') c = '_';
    return k;
}

}  // namespace

void MsdeConfig::validate() const {
    shift.validate();
    if (pca_dim < 1) usage_error(fmt::format("pca_dim must be >= 1, got {}", pca_dim));
    if (!(lambda > 0.0)) usage_error(fmt::format("lambda must be > 0, got {}", lambda));
    if (threads < 1) usage_error(fmt::format("threads must be >= 1, got {}", threads));
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {"k",       "t_nbd",       "eta",          "max_iters",
                                                  "tol",     "k_umap",      "pca_dim",      "lambda",
                                                  "standardize", "fit_on_joint", "static_graph", "seed",
                                                  "threads"};
    return keys;
}

void set_config_value(MsdeConfig& c, std::string_view raw_key, std::string_view value) {
    const std::string key = normalize_key(raw_key);
    if (key == "k") c.shift.k = parse_number<Index>(key, value);
    else if (key == "t_nbd") c.shift.t_nbd = parse_number<Index>(key, value);
    else if (key == "eta") c.shift.eta = parse_number<double>(key, value);
    else if (key == "max_iters") c.shift.max_iters = parse_number<Index>(key, value);
    else if (key == "tol") c.shift.tol = parse_number<double>(key, value);
    else if (key == "k_umap") c.shift.k_umap = parse_number<Index>(key, value);
    else if (key == "static_graph") c.shift.static_graph = parse_bool(key, value);
    else if (key == "pca_dim") c.pca_dim = parse_number<Index>(key, value);
    else if (key == "lambda") c.lambda = parse_number<double>(key, value);
    else if (key == "standardize") c.standardize = parse_bool(key, value);
    else if (key == "fit_on_joint") c.fit_on_joint = parse_bool(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") c.threads = parse_number<int>(key, value);
    else usage_error(fmt::format("unknown config key '{}'", raw_key));
}

void apply_config_text(MsdeConfig& config, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty() || view.front() == '[') continue;  // blank, or a TOML table header
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) usage_error(fmt::format("config line {} has no '='", line_no));
        const auto key = trim(view.substr(0, eq));
        auto value = trim(view.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        set_config_value(config, key, value);
    }
}

void apply_config_file(MsdeConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) usage_error(fmt::format("cannot read config file '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(config, buf.str());
}

std::string config_to_text(const MsdeConfig& c) {
    auto b = [](bool v) { return v ? "true" : "false"; };
    std::string out;
    out += fmt::format("k = {}\n", c.shift.k);
    out += fmt::format("t_nbd = {}\n", c.shift.t_nbd);
    out += fmt::format("eta = {:.17g}\n", c.shift.eta);
    out += fmt::format("max_iters = {}\n", c.shift.max_iters);
    out += fmt::format("tol = {:.17g}\n", c.shift.tol);
    out += fmt::format("k_umap = {}\n", c.shift.k_umap);
    out += fmt::format("pca_dim = {}\n", c.pca_dim);
    out += fmt::format("lambda = {:.17g}\n", c.lambda);
    out += fmt::format("standardize = {}\n", b(c.standardize));
    out += fmt::format("fit_on_joint = {}\n", b(c.fit_on_joint));
    out += fmt::format("static_graph = {}\n", b(c.shift.static_graph));
    out += fmt::format("seed = {}\n", c.seed);
    out += fmt::format("threads = {}\n", c.threads);
    return out;
}

}  // namespace msde
