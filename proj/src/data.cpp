#include "stcd/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace fs = std::filesystem;

namespace stcd {

void BiTemporalSample::validate() const {
    if (!pre_image.defined() || !post_image.defined())
        throw DataError("sample '" + name + "': undefined image tensor");
    if (pre_image.rank() != 3 || pre_image.dim(0) != 3)
        throw DataError("sample '" + name + "': pre image must be (3,H,W), got " +
                        shape_str(pre_image.shape()));
    if (post_image.shape() != pre_image.shape())
        throw DataError("sample '" + name + "': image shapes differ");
    if (static_cast<int64_t>(label.size()) !=
        static_cast<int64_t>(pre_image.dim(1)) * pre_image.dim(2))
        throw DataError("sample '" + name + "': label size does not match image extent");
    for (uint8_t v : label)
        if (v > 1) throw DataError("sample '" + name + "': label must be 0/1");
}

void SynthConfig::validate() const {
    if (size <= 0 || size % 32 != 0)
        throw ConfigError("synth: size must be a positive multiple of 32, got " +
                          std::to_string(size));
    if (min_shapes < 0 || max_shapes < min_shapes) throw ConfigError("synth: bad shape count range");
    for (double p : {p_add, p_remove, p_alter})
        if (p < 0.0 || p > 1.0) throw ConfigError("synth: probabilities must be in [0,1]");
    if (noise < 0.0 || illumination < 0.0) throw ConfigError("synth: negative perturbation amplitude");
}

namespace {

struct ShapeSpec {
    bool ellipse;
    int cx, cy, rx, ry;     // rectangles use the same half-extent box
    double color[3];

    bool covers(int x, int y) const {
        if (!ellipse) return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
        const double dx = (x - cx) / static_cast<double>(rx);
        const double dy = (y - cy) / static_cast<double>(ry);
        return dx * dx + dy * dy <= 1.0;
    }
};

void draw(std::vector<double>& img, int size, const ShapeSpec& s) {
    for (int y = std::max(0, s.cy - s.ry); y <= std::min(size - 1, s.cy + s.ry); ++y)
        for (int x = std::max(0, s.cx - s.rx); x <= std::min(size - 1, s.cx + s.rx); ++x)
            if (s.covers(x, y))
                for (int c = 0; c < 3; ++c) img[(c * size + y) * size + x] = s.color[c];
}

void mark(std::vector<uint8_t>& mask, int size, const ShapeSpec& s) {
    for (int y = std::max(0, s.cy - s.ry); y <= std::min(size - 1, s.cy + s.ry); ++y)
        for (int x = std::max(0, s.cx - s.rx); x <= std::min(size - 1, s.cx + s.rx); ++x)
            if (s.covers(x, y)) mask[y * size + x] = 1;
}

}  // namespace

std::vector<BiTemporalSample> generate_synthetic(const SynthConfig& cfg, int n) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<BiTemporalSample> out;
    out.reserve(n);
    const int size = cfg.size;
    const int64_t plane = static_cast<int64_t>(size) * size;

    for (int idx = 0; idx < n; ++idx) {
        std::vector<double> pre(3 * plane), post;
        // smooth background: per-channel base plus a diagonal ramp
        for (int c = 0; c < 3; ++c) {
            const double base = 0.2 + 0.4 * unit(rng);
            const double ramp = 0.2 * (unit(rng) - 0.5);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    pre[(c * size + y) * size + x] = base + ramp * (x + y) / (2.0 * size);
        }

        const int count =
            cfg.min_shapes +
            (cfg.max_shapes > cfg.min_shapes
                 ? static_cast<int>(rng() % static_cast<uint64_t>(cfg.max_shapes - cfg.min_shapes + 1))
                 : 0);
        std::vector<ShapeSpec> statics, added, removed, altered_pre, altered_post;
        for (int k = 0; k < count; ++k) {
            ShapeSpec s;
            s.ellipse = rng() % 2 == 0;
            s.rx = size / 10 + static_cast<int>(rng() % static_cast<uint64_t>(size / 5));
            s.ry = size / 10 + static_cast<int>(rng() % static_cast<uint64_t>(size / 5));
            s.cx = static_cast<int>(rng() % static_cast<uint64_t>(size));
            s.cy = static_cast<int>(rng() % static_cast<uint64_t>(size));
            for (double& c : s.color) c = unit(rng);

            const double roll = unit(rng);
            if (roll < cfg.p_add) {
                added.push_back(s);
            } else if (roll < cfg.p_add + cfg.p_remove) {
                removed.push_back(s);
            } else if (roll < cfg.p_add + cfg.p_remove + cfg.p_alter) {
                altered_pre.push_back(s);
                ShapeSpec t = s;
                for (double& c : t.color) c = unit(rng);
                altered_post.push_back(t);
            } else {
                statics.push_back(s);
            }
        }

        // statics first so changed footprints stay visible in both frames
        for (const auto& s : statics) draw(pre, size, s);
        post = pre;
        std::vector<uint8_t> label(plane, 0);
        for (const auto& s : removed) {
            draw(pre, size, s);
            mark(label, size, s);
        }
        for (const auto& s : added) {
            draw(post, size, s);
            mark(label, size, s);
        }
        for (size_t k = 0; k < altered_pre.size(); ++k) {
            draw(pre, size, altered_pre[k]);
            draw(post, size, altered_post[k]);
            mark(label, size, altered_pre[k]);
        }

        // photometric nuisance on the post frame only, excluded from the label
        const double shift = cfg.illumination * (2.0 * unit(rng) - 1.0);
        for (double& v : post) {
            v += shift + cfg.noise * (2.0 * unit(rng) - 1.0);
            v = std::clamp(v, 0.0, 1.0);
        }
        for (double& v : pre) v = std::clamp(v, 0.0, 1.0);

        BiTemporalSample s;
        s.pre_image = Tensor::from({3, size, size}, std::move(pre));
        s.post_image = Tensor::from({3, size, size}, std::move(post));
        s.label = std::move(label);
        s.name = "synth_" + std::to_string(idx);
        out.push_back(std::move(s));
    }
    return out;
}

void write_pnm(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw DataError("write_pnm: channels must be 1 or 3");
    if (static_cast<int64_t>(img.pixels.size()) !=
        static_cast<int64_t>(img.width) * img.height * img.channels)
        throw DataError("write_pnm: pixel buffer size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_pnm: cannot open '" + path + "'");
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw DataError("write_pnm: short write to '" + path + "'");
}

ImageU8 read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_pnm: cannot open '" + path + "'");
    std::string magic;
    f >> magic;
    if (magic != "P5" && magic != "P6") throw DataError("read_pnm: '" + path + "' is not P5/P6");

    auto next_token = [&f, &path]() {
        // PNM allows '#' comments between header tokens
        std::string tok;
        for (;;) {
            if (!(f >> tok)) throw DataError("read_pnm: truncated header in '" + path + "'");
            if (tok[0] != '#') return tok;
            std::string rest;
            std::getline(f, rest);
        }
    };

    ImageU8 img;
    img.channels = magic == "P5" ? 1 : 3;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (img.width <= 0 || img.height <= 0 || maxval != 255)
        throw DataError("read_pnm: unsupported header in '" + path + "'");
    f.get();  // single whitespace byte before the raster
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw DataError("read_pnm: truncated raster in '" + path + "'");
    return img;
}

ImageU8 to_u8(const Tensor& chw) {
    Shape sh = chw.shape();
    if (sh.size() == 2) sh = {1, sh[0], sh[1]};
    if (sh.size() != 3 || (sh[0] != 1 && sh[0] != 3))
        throw DataError("to_u8: expected (1|3,H,W), got " + shape_str(chw.shape()));
    ImageU8 img;
    img.channels = sh[0];
    img.height = sh[1];
    img.width = sh[2];
    const int64_t plane = static_cast<int64_t>(sh[1]) * sh[2];
    img.pixels.resize(static_cast<size_t>(plane) * sh[0]);
    const auto& d = chw.data();
    for (int64_t p = 0; p < plane; ++p)
        for (int c = 0; c < sh[0]; ++c) {
            const double v = std::clamp(d[c * plane + p], 0.0, 1.0);
            img.pixels[p * sh[0] + c] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

Tensor to_tensor(const ImageU8& img) {
    const int64_t plane = static_cast<int64_t>(img.width) * img.height;
    std::vector<double> d(static_cast<size_t>(plane) * img.channels);
    for (int64_t p = 0; p < plane; ++p)
        for (int c = 0; c < img.channels; ++c)
            d[c * plane + p] = img.pixels[p * img.channels + c] / 255.0;
    return Tensor::from({img.channels, img.height, img.width}, std::move(d));
}

namespace {

Tensor to_rgb(const ImageU8& img) {
    Tensor t = to_tensor(img);
    if (img.channels == 3) return t;
    return concat({t, t, t}, 0);
}

}  // namespace

std::vector<BiTemporalSample> load_dataset(const std::string& root,
                                           std::vector<std::string>* warnings) {
    const fs::path a = fs::path(root) / "A", b = fs::path(root) / "B",
                   lab = fs::path(root) / "label";
    for (const auto& dir : {a, b, lab})
        if (!fs::is_directory(dir)) throw DataError("load_dataset: missing directory " + dir.string());

    std::map<std::string, fs::path> in_b, in_lab;
    for (const auto& e : fs::directory_iterator(b))
        if (e.is_regular_file()) in_b[e.path().stem().string()] = e.path();
    for (const auto& e : fs::directory_iterator(lab))
        if (e.is_regular_file()) in_lab[e.path().stem().string()] = e.path();

    std::vector<fs::path> pre_files;
    for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file()) pre_files.push_back(e.path());
    std::sort(pre_files.begin(), pre_files.end());

    std::vector<BiTemporalSample> out;
    for (const auto& pre_path : pre_files) {
        const std::string stem = pre_path.stem().string();
        auto bi = in_b.find(stem), li = in_lab.find(stem);
        if (bi == in_b.end() || li == in_lab.end()) {
            if (warnings)
                warnings->push_back("skipping '" + stem + "': missing " +
                                    (bi == in_b.end() ? "B" : "label") + " counterpart");
            continue;
        }
        ImageU8 pre = read_pnm(pre_path.string());
        ImageU8 post = read_pnm(bi->second.string());
        ImageU8 truth = read_pnm(li->second.string());
        if (pre.width != post.width || pre.height != post.height || pre.width != truth.width ||
            pre.height != truth.height)
            throw DataError("load_dataset: size mismatch in triple '" + stem + "'");

        BiTemporalSample s;
        s.name = stem;
        s.pre_image = to_rgb(pre);
        s.post_image = to_rgb(post);
        s.label.resize(static_cast<size_t>(truth.width) * truth.height);
        const int step = truth.channels;
        for (size_t i = 0; i < s.label.size(); ++i) s.label[i] = truth.pixels[i * step] >= 128;
        out.push_back(std::move(s));
    }
    return out;
}

void export_dataset(const std::string& root, const std::vector<BiTemporalSample>& samples) {
    for (const char* sub : {"A", "B", "label"}) fs::create_directories(fs::path(root) / sub);
    for (const auto& s : samples) {
        s.validate();
        write_pnm((fs::path(root) / "A" / (s.name + ".ppm")).string(), to_u8(s.pre_image));
        write_pnm((fs::path(root) / "B" / (s.name + ".ppm")).string(), to_u8(s.post_image));
        ImageU8 lab;
        lab.width = s.width();
        lab.height = s.height();
        lab.channels = 1;
        lab.pixels.resize(s.label.size());
        for (size_t i = 0; i < s.label.size(); ++i) lab.pixels[i] = s.label[i] ? 255 : 0;
        write_pnm((fs::path(root) / "label" / (s.name + ".pgm")).string(), lab);
    }
}

namespace {

BiTemporalSample crop_at(const BiTemporalSample& s, int x0, int y0, int patch) {
    const int h = s.height(), w = s.width();
    const int64_t plane = static_cast<int64_t>(h) * w;
    auto cut = [&](const Tensor& img) {
        std::vector<double> d(static_cast<size_t>(3) * patch * patch);
        const auto& src = img.data();
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    d[(static_cast<int64_t>(c) * patch + y) * patch + x] =
                        src[c * plane + static_cast<int64_t>(y0 + y) * w + (x0 + x)];
        return Tensor::from({3, patch, patch}, std::move(d));
    };
    BiTemporalSample out;
    out.name = s.name + "_" + std::to_string(x0) + "_" + std::to_string(y0);
    out.pre_image = cut(s.pre_image);
    out.post_image = cut(s.post_image);
    out.label.resize(static_cast<size_t>(patch) * patch);
    for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
            out.label[static_cast<size_t>(y) * patch + x] =
                s.label[static_cast<size_t>(y0 + y) * w + (x0 + x)];
    return out;
}

}  // namespace

std::vector<BiTemporalSample> tile(const BiTemporalSample& s, int patch) {
    if (patch <= 0) throw ConfigError("tile: patch size must be positive");
    std::vector<BiTemporalSample> out;
    for (int y0 = 0; y0 + patch <= s.height(); y0 += patch)
        for (int x0 = 0; x0 + patch <= s.width(); x0 += patch) out.push_back(crop_at(s, x0, y0, patch));
    return out;
}

BiTemporalSample random_crop(const BiTemporalSample& s, int patch, std::mt19937_64& rng) {
    if (patch <= 0) throw ConfigError("random_crop: patch size must be positive");
    patch = std::min({patch, s.height(), s.width()});
    const int xr = s.width() - patch, yr = s.height() - patch;
    const int x0 = xr > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(xr + 1)) : 0;
    const int y0 = yr > 0 ? static_cast<int>(rng() % static_cast<uint64_t>(yr + 1)) : 0;
    return crop_at(s, x0, y0, patch);
}

ImageU8 render_change_map(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth,
                          int height, int width) {
    if (pred.size() != truth.size() ||
        pred.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
        throw DimensionError("render_change_map: mask/extent mismatch");
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = 3;
    img.pixels.resize(pred.size() * 3);
    for (size_t i = 0; i < pred.size(); ++i) {
        uint8_t r = 0, g = 0, b = 0;
        if (pred[i] && truth[i]) r = g = b = 255;  // TP white
        else if (pred[i] && !truth[i]) r = 255;    // FP red
        else if (!pred[i] && truth[i]) g = 255;    // FN green
        img.pixels[3 * i] = r;
        img.pixels[3 * i + 1] = g;
        img.pixels[3 * i + 2] = b;
    }
    return img;
}

}  // namespace stcd
