// Command-line workbench: dataset generation, amplitude-mixup augmentation,
// leave-one-domain-out training, evaluation, ablations and report merging.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ramseg/checkpoint.hpp"
#include "ramseg/config.hpp"
#include "ramseg/dataset_io.hpp"
#include "ramseg/eval.hpp"
#include "ramseg/metrics.hpp"
#include "ramseg/spectral.hpp"
#include "ramseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace ramseg;

namespace {

fs::path resolve_out(const std::string& p) {
    fs::path path(p);
    const char* root = std::getenv("RAMSEG_OUT_ROOT");
    if (root && *root && path.is_relative()) return fs::path(root) / path;
    return path;
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw std::runtime_error("empty seed list");
    return seeds;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::trunc | std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << content;
}

struct TrainCliOpts {
    std::string data_dir;
    std::string config_path;
    std::string out_dir;
    int holdout = -1;
    int epochs = -1;
    int batch = -1;
    int seed = -1;
    double beta = -1.0;
    bool no_ram = false, no_dsir = false, no_consistency = false;
};

RunConfig load_run_config(const std::string& config_path) {
    if (config_path.empty()) return run_config_from(ConfigFile{});
    return run_config_from(ConfigFile::parse_file(config_path));
}

RunConfig apply_overrides(RunConfig cfg, const TrainCliOpts& o) {
    if (o.epochs > 0) cfg.train.epochs = o.epochs;
    if (o.batch > 0) cfg.train.batch_size = o.batch;
    if (o.seed >= 0) cfg.train.seed = static_cast<uint64_t>(o.seed);
    if (o.beta >= 0.0) cfg.train.ram_beta = o.beta;
    if (o.no_ram) cfg.train.use_ram_aug = false;
    if (o.no_dsir) cfg.train.use_dsir = false;
    if (o.no_consistency) cfg.train.use_consistency = false;
    return cfg;
}

/// Loads every domain except the held-out one; its files are never opened.
Benchmark load_sources(const fs::path& data_dir, int holdout) {
    const Benchmark meta_only = load_benchmark(data_dir, std::vector<int>{});
    std::vector<int> domains;
    for (int k = 0; k < meta_only.num_domains(); ++k)
        if (k != holdout) domains.push_back(k);
    return load_benchmark(data_dir, domains);
}

std::vector<TensorRef> checkpoint_entries(SegNet& model) {
    std::vector<TensorRef> entries = model.parameters();
    const std::vector<TensorRef> bufs = model.buffers();
    entries.insert(entries.end(), bufs.begin(), bufs.end());
    return entries;
}

int cmd_gen_data(int domains, int per_domain, int seed, int size, bool fundus,
                 const std::string& out) {
    const Benchmark bench =
        build_benchmark(domains, per_domain, static_cast<uint64_t>(seed), size, fundus);
    const fs::path root = resolve_out(out);
    save_benchmark(bench, root);
    std::cout << "wrote " << domains << " domains x " << per_domain << " samples to " << root
              << "\n";
    return 0;
}

int cmd_augment(const std::string& data, const std::string& out, double beta, int seed,
                const std::string& split) {
    const Benchmark bench = load_benchmark(data);
    Benchmark aug = bench;
    Rng rng(Rng::mix(static_cast<uint64_t>(seed), 0xa09ULL));

    std::vector<std::vector<Tensor>> orig_pool(bench.domains.size());
    for (size_t k = 0; k < bench.domains.size(); ++k)
        for (const DomainSample& s :
             split == "test" ? bench.domains[k].test : bench.domains[k].train)
            orig_pool[k].push_back(s.image);

    std::vector<std::vector<Tensor>> aug_pool(bench.domains.size());
    for (size_t k = 0; k < aug.domains.size(); ++k) {
        auto& samples = split == "test" ? aug.domains[k].test : aug.domains[k].train;
        for (DomainSample& s : samples) {
            int nk = static_cast<int>(k);
            while (nk == static_cast<int>(k))
                nk = rng.uniform_int(static_cast<int>(bench.domains.size()));
            const auto& partners = orig_pool[static_cast<size_t>(nk)];
            const Tensor& partner =
                partners[static_cast<size_t>(rng.uniform_int(static_cast<int>(partners.size())))];
            s.image = ram_augment(s.image, partner, beta, MixRatio(rng.uniform()));
            aug_pool[k].push_back(s.image);
        }
    }

    const double spread_before = domain_spread(orig_pool);
    const double spread_after = domain_spread(aug_pool);

    const fs::path root = resolve_out(out);
    save_benchmark(aug, root);
    std::ostringstream rep;
    rep << "pool,spread\n";
    rep << "original," << format_double(spread_before) << "\n";
    rep << "augmented," << format_double(spread_after) << "\n";
    write_file(root / "spread_report.csv", rep.str());
    std::cout << "spread original=" << spread_before << " augmented=" << spread_after << " ("
              << (spread_after < spread_before ? "narrowed" : "NOT narrowed") << ")\n";
    return 0;
}

int cmd_train(const TrainCliOpts& o) {
    const RunConfig cfg = apply_overrides(load_run_config(o.config_path), o);
    const Benchmark bench = load_sources(o.data_dir, o.holdout);
    if (o.holdout < 0 || o.holdout >= bench.num_domains())
        throw std::runtime_error("holdout domain out of range");
    const fs::path out = resolve_out(o.out_dir);
    const FitResult result = fit(bench, o.holdout, cfg, out);
    std::cout << "trained " << cfg.train.epochs << " epochs, final total loss "
              << result.log.back().losses.total << "\n";
    std::cout << "checkpoint: " << (out / "checkpoint_final.bin") << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, const std::string& data,
             int domain, const std::string& split, const std::string& out) {
    const fs::path ckpt(checkpoint);
    fs::path cfg_path =
        config_path.empty() ? ckpt.parent_path() / "config.ini" : fs::path(config_path);
    if (!fs::exists(cfg_path)) throw std::runtime_error("config not found: " + cfg_path.string());

    std::ifstream cfg_in(cfg_path, std::ios::binary);
    const std::string cfg_bytes((std::istreambuf_iterator<char>(cfg_in)),
                                std::istreambuf_iterator<char>());
    RunConfig cfg = run_config_from(ConfigFile::parse_text(cfg_bytes));

    const Benchmark bench = load_benchmark(data, std::vector<int>{domain});
    ModelConfig mcfg = cfg.model;
    mcfg.num_domains = bench.num_domains();
    mcfg.in_channels = bench.channels;
    mcfg.classes = bench.classes;
    SegNet model(mcfg, cfg.train.seed);
    load_checkpoint(ckpt, checkpoint_entries(model));

    const auto& samples = split == "train" ? bench.domains[static_cast<size_t>(domain)].train
                                           : bench.domains[static_cast<size_t>(domain)].test;
    const EvalReport rep =
        evaluate(model, samples, domain, split, fingerprint_bytes(cfg_bytes), {cfg.train.seed});

    std::cout << rep.to_table();
    if (!out.empty()) {
        const fs::path root = resolve_out(out);
        fs::create_directories(root);
        write_file(root / "report.csv", rep.to_csv());
        write_file(root / "report.txt", rep.to_table());
        std::cout << "wrote " << (root / "report.csv") << "\n";
    }
    return 0;
}

struct AblationRow {
    bool ram, dsir, consist;
    uint64_t seed;
    double dice_pct, asd;
};

int cmd_ablate(const std::string& data, int holdout, const std::string& seeds_str, int epochs,
               const std::string& config_path, const std::string& out, bool all_combos) {
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_str);
    RunConfig base = load_run_config(config_path);
    if (epochs > 0) base.train.epochs = epochs;
    // Sources feed training; the held-out domain is loaded separately and
    // only its test split is ever evaluated.
    const Benchmark bench = load_sources(data, holdout);
    const Benchmark held = load_benchmark(data, std::vector<int>{holdout});
    if (holdout < 0 || holdout >= bench.num_domains())
        throw std::runtime_error("holdout domain out of range");
    const auto& held_test = held.domains[static_cast<size_t>(holdout)].test;

    std::vector<std::array<bool, 3>> grid;
    if (all_combos) {
        for (int r = 0; r < 2; ++r)
            for (int d = 0; d < 2; ++d)
                for (int c = 0; c < 2; ++c) grid.push_back({r != 0, d != 0, c != 0});
    } else {
        grid = {{false, false, false},   // baseline (plain source aggregation)
                {true, false, false},    // amplitude mixup only
                {false, true, false},    // restoration only
                {true, true, false},     // both, no consistency
                {true, true, true}};     // full method
    }

    std::vector<AblationRow> rows;
    for (const auto& flags : grid) {
        for (uint64_t seed : seeds) {
            RunConfig cfg = base;
            cfg.train.use_ram_aug = flags[0];
            cfg.train.use_dsir = flags[1];
            cfg.train.use_consistency = flags[2];
            cfg.train.seed = seed;
            FitResult fr = fit(bench, holdout, cfg);
            const EvalReport rep =
                evaluate(fr.model, held_test, holdout, "test", fr.config_fingerprint, {seed});
            rows.push_back({flags[0], flags[1], flags[2], seed, rep.mean_dice_pct, rep.mean_asd});
            std::cout << "ram=" << flags[0] << " dsir=" << flags[1] << " consist=" << flags[2]
                      << " seed=" << seed << " dice=" << rep.mean_dice_pct
                      << " asd=" << rep.mean_asd << "\n";
        }
    }

    std::ostringstream csv;
    csv << "ram_aug,dsir,consistency,seed,holdout,dice_pct,asd\n";
    for (const AblationRow& r : rows)
        csv << r.ram << "," << r.dsir << "," << r.consist << "," << r.seed << "," << holdout << ","
            << format_double(r.dice_pct) << "," << format_double(r.asd) << "\n";

    std::ostringstream summary;
    summary << "ram_aug,dsir,consistency,mean_dice_pct,mean_asd,runs\n";
    for (const auto& flags : grid) {
        double dice = 0.0, asd = 0.0;
        int n = 0;
        for (const AblationRow& r : rows)
            if (r.ram == flags[0] && r.dsir == flags[1] && r.consist == flags[2]) {
                dice += r.dice_pct;
                asd += r.asd;
                ++n;
            }
        summary << flags[0] << "," << flags[1] << "," << flags[2] << "," << format_double(dice / n)
                << "," << format_double(asd / n) << "," << n << "\n";
    }

    const fs::path root = resolve_out(out);
    fs::create_directories(root);
    write_file(root / "ablation.csv", csv.str());
    write_file(root / "ablation_summary.csv", summary.str());
    std::cout << "wrote " << (root / "ablation.csv") << "\n";
    return 0;
}

int cmd_report(const std::string& inputs_str, const std::string& out) {
    std::vector<std::string> inputs;
    std::stringstream ss(inputs_str);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) inputs.push_back(item);
    if (inputs.empty()) throw std::runtime_error("no input files given");

    const fs::path root = resolve_out(out);
    fs::create_directories(root);

    // Training logs (epoch,...) merge into one gnuplot-ready table; ablation
    // CSVs concatenate with their source tagged.
    std::vector<std::pair<std::string, std::vector<double>>> logs;
    std::ostringstream ablation_merged;
    bool ablation_header = false;
    for (const std::string& in : inputs) {
        std::ifstream is(in);
        if (!is) throw std::runtime_error("cannot open " + in);
        std::string header;
        std::getline(is, header);
        if (header.rfind("epoch,", 0) == 0) {
            std::vector<double> totals;
            std::string line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                totals.push_back(std::stod(line.substr(line.rfind(',') + 1)));
            }
            logs.emplace_back(in, std::move(totals));
        } else if (header.rfind("ram_aug,", 0) == 0) {
            if (!ablation_header) {
                ablation_merged << "source," << header << "\n";
                ablation_header = true;
            }
            std::string line;
            while (std::getline(is, line))
                if (!line.empty()) ablation_merged << in << "," << line << "\n";
        } else {
            throw std::runtime_error("unrecognized CSV header in " + in);
        }
    }

    if (!logs.empty()) {
        std::ostringstream dat;
        dat << "# epoch total_loss per run:";
        for (const auto& [name, _] : logs) dat << " " << name;
        dat << "\n";
        size_t max_epochs = 0;
        for (const auto& [_, totals] : logs) max_epochs = std::max(max_epochs, totals.size());
        for (size_t e = 0; e < max_epochs; ++e) {
            dat << e;
            for (const auto& [_, totals] : logs)
                dat << " " << (e < totals.size() ? format_double(totals[e]) : "nan");
            dat << "\n";
        }
        write_file(root / "losses.dat", dat.str());
        std::cout << "wrote " << (root / "losses.dat") << "\n";
    }
    if (ablation_header) {
        write_file(root / "ablation_merged.csv", ablation_merged.str());
        std::cout << "wrote " << (root / "ablation_merged.csv") << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Amplitude-mixup domain-generalization segmentation workbench"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-domain benchmark");
    int gd_domains = 4, gd_per = 50, gd_seed = 7, gd_size = 64;
    bool gd_fundus = false;
    std::string gd_out;
    gen->add_option("--domains", gd_domains, "number of domains")->check(CLI::Range(2, 64));
    gen->add_option("--per-domain", gd_per, "samples per domain");
    gen->add_option("--seed", gd_seed, "benchmark seed");
    gen->add_option("--size", gd_size, "image size");
    gen->add_flag("--fundus", gd_fundus, "3-channel, 2-class nested mode");
    gen->add_option("--out", gd_out, "output directory")->required();

    auto* aug = app.add_subcommand("augment", "Amplitude-mix a dataset and report domain spread");
    std::string ag_data, ag_out, ag_split = "train";
    double ag_beta = 0.2;
    int ag_seed = 11;
    aug->add_option("--data", ag_data, "dataset directory")->required();
    aug->add_option("--out", ag_out, "output directory")->required();
    aug->add_option("--beta", ag_beta, "low-frequency extent in [0,1]");
    aug->add_option("--seed", ag_seed, "augmentation seed");
    aug->add_option("--split", ag_split, "train|test")->check(CLI::IsMember({"train", "test"}));

    auto* tr = app.add_subcommand("train", "Leave-one-domain-out training");
    TrainCliOpts to;
    tr->add_option("--data", to.data_dir, "dataset directory")->required();
    tr->add_option("--holdout", to.holdout, "held-out domain id")->required();
    tr->add_option("--config", to.config_path, "run config file");
    tr->add_option("--out", to.out_dir, "run output directory")->required();
    tr->add_option("--epochs", to.epochs, "override epochs");
    tr->add_option("--batch", to.batch, "override batch size");
    tr->add_option("--seed", to.seed, "override training seed");
    tr->add_option("--beta", to.beta, "override RAM beta");
    tr->add_flag("--no-ram", to.no_ram, "disable amplitude-mixup segmentation training");
    tr->add_flag("--no-dsir", to.no_dsir, "disable the restoration task");
    tr->add_flag("--no-consistency", to.no_consistency, "disable the consistency loss");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on one domain");
    std::string ev_ckpt, ev_cfg, ev_data, ev_split = "test", ev_out;
    int ev_domain = 0;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--config", ev_cfg, "run config (default: config.ini next to checkpoint)");
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--domain", ev_domain, "domain id to evaluate")->required();
    ev->add_option("--split", ev_split, "train|test")->check(CLI::IsMember({"train", "test"}));
    ev->add_option("--out", ev_out, "report output directory");

    auto* ab = app.add_subcommand("ablate", "Run the component on/off grid");
    std::string ab_data, ab_seeds = "1,2,3", ab_cfg, ab_out;
    int ab_holdout = 3, ab_epochs = -1;
    bool ab_all = false;
    ab->add_option("--data", ab_data, "dataset directory")->required();
    ab->add_option("--holdout", ab_holdout, "held-out domain id")->required();
    ab->add_option("--seeds", ab_seeds, "comma-separated training seeds");
    ab->add_option("--config", ab_cfg, "run config file");
    ab->add_option("--epochs", ab_epochs, "override epochs");
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_flag("--all-combos", ab_all, "run all 8 flag combinations");

    auto* rp = app.add_subcommand("report", "Merge run CSVs into plot-ready files");
    std::string rp_inputs, rp_out;
    rp->add_option("--inputs", rp_inputs, "comma-separated CSV paths")->required();
    rp->add_option("--out", rp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;   // usage errors exit 1, --help exits 0
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gd_domains, gd_per, gd_seed, gd_size, gd_fundus, gd_out);
        if (aug->parsed()) return cmd_augment(ag_data, ag_out, ag_beta, ag_seed, ag_split);
        if (tr->parsed()) return cmd_train(to);
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_cfg, ev_data, ev_domain, ev_split, ev_out);
        if (ab->parsed())
            return cmd_ablate(ab_data, ab_holdout, ab_seeds, ab_epochs, ab_cfg, ab_out, ab_all);
        if (rp->parsed()) return cmd_report(rp_inputs, rp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
