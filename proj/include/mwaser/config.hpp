#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "mwaser/dsp.hpp"
#include "mwaser/features.hpp"
#include "mwaser/manifest.hpp"

namespace mwaser {

// Flat key=value experiment configuration. The key set is frozen:
//   windows_ms      comma-separated window widths in ms   (default 25,50,100,200)
//   overlap         fraction in [0,1)                     (default 0.5)
//   window_shape    hamming | rectangular                 (default hamming)
//   max_frames      rows of the feature matrix            (default 200)
//   n_features      feature columns, must be 34           (default 34)
//   lr              learning rate                         (default 0.0004)
//   epochs          training epochs                       (default 1000)
//   batch_size      minibatch size                        (default 32)
//   train_fraction  train share of the split              (default 0.8)
//   seed            RNG seed                              (default 42)
//   protocol        label protocol                        (default custom)
//   cache_dir       feature cache directory               (default cache)
//   deterministic   true forces single-threaded execution (default false)
struct Config {
    std::vector<double> windows_ms{25.0, 50.0, 100.0, 200.0};
    double overlap = 0.5;
    WindowShape window_shape = WindowShape::Hamming;
    size_t max_frames = 200;
    size_t n_features = 34;
    double lr = 0.0004;
    size_t epochs = 1000;
    size_t batch_size = 32;
    double train_fraction = 0.8;
    uint64_t seed = 42;
    Protocol protocol = Protocol::Custom;
    std::string cache_dir = "cache";
    bool deterministic = false;

    std::vector<WindowSpec> window_specs() const {
        std::vector<WindowSpec> specs;
        for (double w : windows_ms) specs.push_back({w, overlap, window_shape});
        return specs;
    }

    void validate() const {
        if (windows_ms.empty()) throw ConfigError("windows_ms must list at least one window");
        for (size_t i = 0; i < windows_ms.size(); ++i) {
            if (!(windows_ms[i] > 0.0)) throw ConfigError("window widths must be positive");
            for (size_t j = i + 1; j < windows_ms.size(); ++j)
                if (windows_ms[i] == windows_ms[j])
                    throw ConfigError("duplicate window width: " + util::format_ms(windows_ms[i]));
        }
        if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
        if (n_features != kFeatureCount)
            throw ConfigError("n_features must be 34 (the extractor's feature set)");
        if (max_frames < 16)
            throw ConfigError("max_frames must be >= 16 to survive four pooling stages");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("train_fraction must lie in (0, 1)");
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
        if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
    }
}

inline uint64_t parse_uint(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + value + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = util::to_lower(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + value + "'");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = util::trim(part);
        if (part.empty()) continue;
        out.push_back(parse_double(key, part));
    }
    if (out.empty()) throw ConfigError(key + " must list at least one value");
    return out;
}

}  // namespace detail

inline void apply_config_entry(Config& cfg, const std::string& key, const std::string& value) {
    if (key == "windows_ms")
        cfg.windows_ms = detail::parse_double_list(key, value);
    else if (key == "overlap")
        cfg.overlap = detail::parse_double(key, value);
    else if (key == "window_shape")
        cfg.window_shape = window_shape_from_string(value);
    else if (key == "max_frames")
        cfg.max_frames = size_t(detail::parse_uint(key, value));
    else if (key == "n_features")
        cfg.n_features = size_t(detail::parse_uint(key, value));
    else if (key == "lr")
        cfg.lr = detail::parse_double(key, value);
    else if (key == "epochs")
        cfg.epochs = size_t(detail::parse_uint(key, value));
    else if (key == "batch_size")
        cfg.batch_size = size_t(detail::parse_uint(key, value));
    else if (key == "train_fraction")
        cfg.train_fraction = detail::parse_double(key, value);
    else if (key == "seed")
        cfg.seed = detail::parse_uint(key, value);
    else if (key == "protocol")
        cfg.protocol = protocol_from_string(value);
    else if (key == "cache_dir")
        cfg.cache_dir = value;
    else if (key == "deterministic")
        cfg.deterministic = detail::parse_bool(key, value);
    else
        throw ConfigError("unknown config key: " + key);
}

inline Config parse_config(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = util::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
        const std::string key = util::trim(line.substr(0, eq));
        const std::string value = util::trim(line.substr(eq + 1));
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

// Fixed-order rendering used for manifest.lock; parsing it back yields the
// same configuration.
inline std::string serialize_config(const Config& cfg) {
    std::ostringstream out;
    out << "windows_ms = ";
    for (size_t i = 0; i < cfg.windows_ms.size(); ++i)
        out << (i ? "," : "") << util::format_ms(cfg.windows_ms[i]);
    out << "\n";
    out << "overlap = " << util::format_ms(cfg.overlap) << "\n";
    out << "window_shape = " << to_string(cfg.window_shape) << "\n";
    out << "max_frames = " << cfg.max_frames << "\n";
    out << "n_features = " << cfg.n_features << "\n";
    out << "lr = " << util::format_ms(cfg.lr) << "\n";
    out << "epochs = " << cfg.epochs << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "train_fraction = " << util::format_ms(cfg.train_fraction) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "protocol = " << to_string(cfg.protocol) << "\n";
    out << "cache_dir = " << cfg.cache_dir << "\n";
    out << "deterministic = " << (cfg.deterministic ? "true" : "false") << "\n";
    return out.str();
}

}  // namespace mwaser
