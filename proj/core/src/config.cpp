#include "ramseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ramseg {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str());
}

ConfigFile ConfigFile::parse_text(const std::string& text) {
    ConfigFile f;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: malformed section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key=value at line " + std::to_string(lineno));
        f.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return f;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    return std::stod(get(section, key, ""));
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    return std::stoi(get(section, key, ""));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: bad boolean '" + v + "' for " + section + "." + key);
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

void TrainConfig::validate() const {
    if (epochs < 1) fail_invalid("train: epochs must be >= 1");
    if (batch_size < 2) fail_invalid("train: batch size must be >= 2");
    if (!(lr > 0)) fail_invalid("train: learning rate must be positive");
    if (!(poly_power > 0)) fail_invalid("train: poly power must be positive");
    if (!(ram_beta >= 0 && ram_beta <= 1)) fail_invalid("train: ram beta must lie in [0,1]");
    if (checkpoint_every < 1) fail_invalid("train: checkpoint cadence must be >= 1");
    loss.validate();
}

RunConfig run_config_from(const ConfigFile& f) {
    RunConfig c;
    c.train.epochs = f.get_int("train", "epochs", c.train.epochs);
    c.train.batch_size = f.get_int("train", "batch", c.train.batch_size);
    c.train.lr = f.get_double("train", "lr", c.train.lr);
    c.train.poly_power = f.get_double("train", "poly_power", c.train.poly_power);
    c.train.seed = static_cast<uint64_t>(f.get_int("train", "seed", static_cast<int>(c.train.seed)));
    c.train.checkpoint_every = f.get_int("train", "checkpoint_every", c.train.checkpoint_every);
    c.train.use_ram_aug = f.get_bool("train", "use_ram_aug", c.train.use_ram_aug);
    c.train.use_dsir = f.get_bool("train", "use_dsir", c.train.use_dsir);
    c.train.use_consistency = f.get_bool("train", "use_consistency", c.train.use_consistency);

    c.train.loss.lambda1 = f.get_double("loss", "lambda1", c.train.loss.lambda1);
    c.train.loss.lambda2 = f.get_double("loss", "lambda2", c.train.loss.lambda2);
    c.train.loss.lambda3 = f.get_double("loss", "lambda3", c.train.loss.lambda3);
    c.train.loss.lambda4 = f.get_double("loss", "lambda4", c.train.loss.lambda4);
    c.train.loss.epsilon = f.get_double("loss", "epsilon", c.train.loss.epsilon);

    c.train.ram_beta = f.get_double("ram", "beta", c.train.ram_beta);

    c.model.base_channels = f.get_int("model", "base_channels", c.model.base_channels);
    c.model.depth = f.get_int("model", "depth", c.model.depth);

    c.data.domains = f.get_int("data", "domains", c.data.domains);
    c.data.per_domain = f.get_int("data", "per_domain", c.data.per_domain);
    c.data.seed = static_cast<uint64_t>(f.get_int("data", "seed", static_cast<int>(c.data.seed)));
    c.data.image_size = f.get_int("data", "image_size", c.data.image_size);
    c.data.fundus_mode = f.get_bool("data", "fundus", c.data.fundus_mode);

    c.model.num_domains = c.data.domains;
    c.model.in_channels = c.data.fundus_mode ? 3 : 1;
    c.model.classes = c.data.fundus_mode ? 2 : 1;
    c.train.validate();
    c.model.validate();
    return c;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[train]\n";
    os << "epochs=" << cfg.train.epochs << "\n";
    os << "batch=" << cfg.train.batch_size << "\n";
    os << "lr=" << format_double(cfg.train.lr) << "\n";
    os << "poly_power=" << format_double(cfg.train.poly_power) << "\n";
    os << "seed=" << cfg.train.seed << "\n";
    os << "checkpoint_every=" << cfg.train.checkpoint_every << "\n";
    os << "use_ram_aug=" << (cfg.train.use_ram_aug ? 1 : 0) << "\n";
    os << "use_dsir=" << (cfg.train.use_dsir ? 1 : 0) << "\n";
    os << "use_consistency=" << (cfg.train.use_consistency ? 1 : 0) << "\n";
    os << "[loss]\n";
    os << "lambda1=" << format_double(cfg.train.loss.lambda1) << "\n";
    os << "lambda2=" << format_double(cfg.train.loss.lambda2) << "\n";
    os << "lambda3=" << format_double(cfg.train.loss.lambda3) << "\n";
    os << "lambda4=" << format_double(cfg.train.loss.lambda4) << "\n";
    os << "epsilon=" << format_double(cfg.train.loss.epsilon) << "\n";
    os << "[ram]\n";
    os << "beta=" << format_double(cfg.train.ram_beta) << "\n";
    os << "[model]\n";
    os << "base_channels=" << cfg.model.base_channels << "\n";
    os << "depth=" << cfg.model.depth << "\n";
    os << "[data]\n";
    os << "domains=" << cfg.data.domains << "\n";
    os << "per_domain=" << cfg.data.per_domain << "\n";
    os << "seed=" << cfg.data.seed << "\n";
    os << "image_size=" << cfg.data.image_size << "\n";
    os << "fundus=" << (cfg.data.fundus_mode ? 1 : 0) << "\n";
    return os.str();
}

uint64_t fingerprint_bytes(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ramseg
