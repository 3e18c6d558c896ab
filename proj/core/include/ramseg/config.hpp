#ifndef RAMSEG_CONFIG_HPP
#define RAMSEG_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ramseg/losses.hpp"
#include "ramseg/model.hpp"

namespace ramseg {

/// Flat "[section]" + "key=value" text file; '#' starts a comment.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::filesystem::path& path);
    static ConfigFile parse_text(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct TrainConfig {
    int epochs = 60;
    int batch_size = 8;
    double lr = 1e-3;
    double poly_power = 0.9;
    LossWeights loss;
    double ram_beta = 0.2;
    uint64_t seed = 1;
    int checkpoint_every = 20;
    bool use_ram_aug = true;
    bool use_dsir = true;
    bool use_consistency = true;

    void validate() const;
};

struct DataConfig {
    int domains = 4;
    int per_domain = 50;
    uint64_t seed = 7;
    int image_size = 64;
    bool fundus_mode = false;
};

struct RunConfig {
    TrainConfig train;
    ModelConfig model;
    DataConfig data;
};

/// Defaults overlaid with whatever the file provides, sections
/// [train] [loss] [ram] [model] [data].
RunConfig run_config_from(const ConfigFile& f);

/// Canonical text round-trippable through run_config_from; this is what gets
/// written into run directories and hashed into fingerprints.
std::string canonical_config_text(const RunConfig& cfg);

/// FNV-1a 64 over raw bytes.
uint64_t fingerprint_bytes(const std::string& bytes);

/// Exact double formatting (%.17g) so logs round-trip bit-for-bit.
std::string format_double(double v);

}  // namespace ramseg

#endif
