#include "ramseg/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ramseg/checkpoint.hpp"
#include "ramseg/config.hpp"

namespace ramseg {

namespace fs = std::filesystem;

void write_pgm(const fs::path& path, const Tensor& plane, double lo, double hi) {
    if (plane.rank() != 2) fail_invalid("write_pgm expects {H,W}");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << "P5\n" << plane.dim(1) << " " << plane.dim(0) << "\n255\n";
    const double scale = 255.0 / (hi - lo);
    std::vector<unsigned char> row(static_cast<size_t>(plane.numel()));
    for (long i = 0; i < plane.numel(); ++i) {
        const double v = std::clamp((plane[i] - lo) * scale, 0.0, 255.0);
        row[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Tensor read_pgm(const fs::path& path, double lo, double hi) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path.string());
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is || w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("unsupported PGM header in " + path.string());
    is.get();   // single whitespace after header
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("truncated PGM " + path.string());
    Tensor t({h, w});
    const double scale = (hi - lo) / 255.0;
    for (long i = 0; i < t.numel(); ++i) t[i] = lo + raw[static_cast<size_t>(i)] * scale;
    return t;
}

namespace {

Tensor plane_of(const Tensor& chw, int c) {
    const int h = chw.dim(1), w = chw.dim(2);
    Tensor p({h, w});
    std::copy(chw.data() + static_cast<size_t>(c) * h * w,
              chw.data() + static_cast<size_t>(c + 1) * h * w, p.data());
    return p;
}

std::string img_name(int index, int channels) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%03d.%s", index, channels == 1 ? "pgm" : "rten");
    return buf;
}

std::string label_rel_of(const std::string& img_rel, int cls) {
    // domainK/img_###.ext -> domainK/lbl_###_c<cls>.pgm
    const size_t slash = img_rel.find('/');
    const size_t us = img_rel.find('_', slash);
    const size_t dot = img_rel.rfind('.');
    const std::string index = img_rel.substr(us + 1, dot - us - 1);
    return img_rel.substr(0, slash + 1) + "lbl_" + index + "_c" + std::to_string(cls) + ".pgm";
}

void save_sample(const fs::path& root, const std::string& img_rel, const DomainSample& s) {
    const int classes = s.label.dim(0);
    if (s.image.dim(0) == 1)
        write_pgm(root / img_rel, plane_of(s.image, 0), -1.0, 1.0);
    else
        write_tensor_file(root / img_rel, s.image);
    for (int c = 0; c < classes; ++c)
        write_pgm(root / label_rel_of(img_rel, c), plane_of(s.label, c), 0.0, 1.0);
}

DomainSample load_sample(const fs::path& root, const std::string& img_rel, int domain, int channels,
                         int classes, int size, std::vector<std::string>* audit) {
    auto note = [audit, &root](const std::string& rel) {
        if (audit) audit->push_back((root / rel).string());
    };
    DomainSample s;
    s.domain = domain;
    note(img_rel);
    if (channels == 1) {
        const Tensor p = read_pgm(root / img_rel, -1.0, 1.0);
        s.image = p.reshaped({1, p.dim(0), p.dim(1)});
    } else {
        s.image = read_tensor_file(root / img_rel);
    }
    s.label = Tensor({classes, size, size});
    for (int c = 0; c < classes; ++c) {
        const std::string rel = label_rel_of(img_rel, c);
        note(rel);
        const Tensor p = read_pgm(root / rel, 0.0, 1.0);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) s.label.at3(c, y, x) = p.at2(y, x) > 0.5 ? 1.0 : 0.0;
    }
    return s;
}

}  // namespace

void save_benchmark(const Benchmark& bench, const fs::path& root) {
    fs::create_directories(root);
    std::ofstream meta(root / "meta.txt", std::ios::trunc);
    meta << "domains=" << bench.num_domains() << "\n";
    meta << "per_domain=" << bench.per_domain << "\n";
    meta << "seed=" << bench.seed << "\n";
    meta << "image_size=" << bench.image_size << "\n";
    meta << "channels=" << bench.channels << "\n";
    meta << "classes=" << bench.classes << "\n";
    if (!meta) throw std::runtime_error("cannot write " + (root / "meta.txt").string());

    std::ofstream manifest(root / "manifest.txt", std::ios::trunc);
    for (int k = 0; k < bench.num_domains(); ++k) {
        const fs::path dir = root / ("domain" + std::to_string(k));
        fs::create_directories(dir);
        const DomainDataset& ds = bench.domains[static_cast<size_t>(k)];
        int index = 0;
        for (const auto* split : {&ds.train, &ds.test}) {
            const char* tag = (split == &ds.train) ? "train" : "test";
            for (const DomainSample& s : *split) {
                const std::string rel =
                    "domain" + std::to_string(k) + "/" + img_name(index, bench.channels);
                save_sample(root, rel, s);
                manifest << rel << "\t" << k << "\t" << tag << "\n";
                ++index;
            }
        }
    }
    if (!manifest) throw std::runtime_error("cannot write " + (root / "manifest.txt").string());
}

Benchmark load_benchmark(const fs::path& root, const std::optional<std::vector<int>>& only_domains,
                         std::vector<std::string>* audit) {
    auto note = [audit, &root](const std::string& rel) {
        if (audit) audit->push_back((root / rel).string());
    };
    note("meta.txt");
    const ConfigFile meta = ConfigFile::parse_file(root / "meta.txt");
    Benchmark bench;
    const int domains = meta.get_int("", "domains", 0);
    bench.per_domain = meta.get_int("", "per_domain", 0);
    bench.seed = static_cast<uint64_t>(meta.get_int("", "seed", 0));
    bench.image_size = meta.get_int("", "image_size", 0);
    bench.channels = meta.get_int("", "channels", 1);
    bench.classes = meta.get_int("", "classes", 1);
    if (domains < 1 || bench.image_size < 1) throw std::runtime_error("corrupt meta.txt in " + root.string());

    bench.domains.resize(static_cast<size_t>(domains));
    for (int k = 0; k < domains; ++k)
        bench.domains[static_cast<size_t>(k)].spec =
            DomainSpec::canonical(k, domains, bench.seed, bench.channels);

    auto wanted = [&only_domains](int k) {
        return !only_domains ||
               std::find(only_domains->begin(), only_domains->end(), k) != only_domains->end();
    };

    note("manifest.txt");
    std::ifstream manifest(root / "manifest.txt");
    if (!manifest) throw std::runtime_error("cannot open manifest in " + root.string());
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string rel, split;
        int domain = -1;
        ls >> rel >> domain >> split;
        if (!ls || domain < 0 || domain >= domains)
            throw std::runtime_error("corrupt manifest line: " + line);
        if (!wanted(domain)) continue;
        DomainSample s =
            load_sample(root, rel, domain, bench.channels, bench.classes, bench.image_size, audit);
        auto& ds = bench.domains[static_cast<size_t>(domain)];
        (split == "train" ? ds.train : ds.test).push_back(std::move(s));
    }
    return bench;
}

}  // namespace ramseg
