#pragma once

// Labelled feature datasets: a text format, a packed little-endian binary
// format, and two synthetic generators.
//
// Text:    # edgesnn-dataset features=N classes=C range=LO,HI
//          label,f1,...,fN
// Binary:  "ESDS" u32 version, u32 features, u32 classes, u64 samples,
//          f64 lo, f64 hi, then per sample u32 label and N f64 features.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "edgesnn/error.hpp"
#include "edgesnn/io/format.hpp"
#include "edgesnn/rng.hpp"

namespace edgesnn::io {

struct Sample {
    std::vector<double> features;
    std::size_t label = 0;
};

struct Dataset {
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    double range_lo = 0.0;
    double range_hi = 1.0;
    std::vector<Sample> samples;

    void validate(const std::string& source = "<dataset>") const {
        if (n_features == 0 || n_classes == 0) throw ParseError(source + ": features and classes must be positive");
        if (!(range_lo < range_hi) || !std::isfinite(range_lo) || !std::isfinite(range_hi))
            throw ParseError(source + ": empty normalization range");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            if (s.features.size() != n_features)
                throw ParseError(source + ": sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                                 " features, expected " + std::to_string(n_features));
            if (s.label >= n_classes)
                throw ParseError(source + ": sample " + std::to_string(i) + " label " + std::to_string(s.label) +
                                 " outside [0, " + std::to_string(n_classes) + ")");
            for (double x : s.features)
                if (!(x >= range_lo && x <= range_hi))
                    throw ParseError(source + ": sample " + std::to_string(i) + " has a feature outside the range");
        }
    }

    /// Features of sample i mapped onto [0, 1].
    std::vector<double> normalized(std::size_t i) const {
        std::vector<double> x = samples.at(i).features;
        for (double& v : x) v = std::clamp((v - range_lo) / (range_hi - range_lo), 0.0, 1.0);
        return x;
    }
};

inline std::string dataset_to_text(const Dataset& d) {
    d.validate();
    std::ostringstream os;
    os << "# edgesnn-dataset features=" << d.n_features << " classes=" << d.n_classes << " range=" << fmt(d.range_lo)
       << ',' << fmt(d.range_hi) << '\n';
    for (const auto& s : d.samples) {
        os << s.label;
        for (double x : s.features) os << ',' << fmt(x);
        os << '\n';
    }
    return os.str();
}

inline Dataset dataset_from_text(std::string_view text, const std::string& source = "<dataset>") {
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t n = 0;
    Dataset d;
    bool header = false;
    while (std::getline(is, line)) {
        ++n;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (!header) {
            std::istringstream hs(t);
            std::string hash, magic;
            hs >> hash >> magic;
            if (hash != "#" || magic != "edgesnn-dataset") throw ParseError(source, n, "missing edgesnn-dataset header");
            std::string kv;
            bool f = false, c = false;
            while (hs >> kv) {
                const auto eq = kv.find('=');
                const auto key = kv.substr(0, eq), value = eq == std::string::npos ? "" : kv.substr(eq + 1);
                bool ok = true;
                if (key == "features") ok = f = parse_number(value, d.n_features);
                else if (key == "classes") ok = c = parse_number(value, d.n_classes);
                else if (key == "range") {
                    const auto comma = value.find(',');
                    ok = comma != std::string::npos && parse_number(value.substr(0, comma), d.range_lo) &&
                         parse_number(value.substr(comma + 1), d.range_hi);
                } else
                    ok = false;
                if (!ok) throw ParseError(source, n, "bad header field '" + kv + "'");
            }
            if (!f || !c) throw ParseError(source, n, "header needs features= and classes=");
            if (d.n_features == 0 || d.n_classes == 0 || !(d.range_lo < d.range_hi))
                throw ParseError(source, n, "header declares an empty dataset shape or range");
            header = true;
            continue;
        }
        if (t[0] == '#') continue;
        Sample s;
        std::size_t field = 0;
        std::size_t pos = 0;
        while (pos <= t.size()) {
            const auto comma = t.find(',', pos);
            const auto tok = std::string_view(t).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (field == 0) {
                if (!parse_number(tok, s.label)) throw ParseError(source, n, "bad label '" + trim(tok) + "'");
                if (s.label >= d.n_classes)
                    throw ParseError(source, n, "label " + std::to_string(s.label) + " outside [0, " +
                                                    std::to_string(d.n_classes) + ")");
            } else {
                double x = 0;
                if (!parse_number(tok, x)) throw ParseError(source, n, "bad feature '" + trim(tok) + "'");
                if (!(x >= d.range_lo && x <= d.range_hi))
                    throw ParseError(source, n, "feature " + std::to_string(field) + " = " + trim(tok) +
                                                    " outside the declared range");
                s.features.push_back(x);
            }
            ++field;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (s.features.size() != d.n_features)
            throw ParseError(source, n, "expected " + std::to_string(d.n_features) + " features, found " +
                                            std::to_string(s.features.size()));
        d.samples.push_back(std::move(s));
    }
    if (!header) throw ParseError(source, std::max<std::size_t>(n, 1), "missing edgesnn-dataset header");
    return d;
}

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>)
        bits = std::bit_cast<std::uint64_t>(v);
    else
        bits = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class LeReader {
public:
    LeReader(std::string_view data, const std::string& source) : d_(data), src_(source) {}

    template <class T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > d_.size())
            throw ParseError(src_ + ": truncated at byte " + std::to_string(pos_) + " while reading " + what);
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(d_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        if constexpr (std::is_floating_point_v<T>)
            return std::bit_cast<T>(bits);
        else
            return static_cast<T>(bits);
    }

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == d_.size(); }

private:
    std::string_view d_;
    const std::string& src_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline constexpr std::array<char, 4> kDatasetMagic{'E', 'S', 'D', 'S'};

inline std::string dataset_to_binary(const Dataset& d) {
    d.validate();
    std::string out(kDatasetMagic.begin(), kDatasetMagic.end());
    detail::put_le<std::uint32_t>(out, 1);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.n_features));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.n_classes));
    detail::put_le<std::uint64_t>(out, d.samples.size());
    detail::put_le<double>(out, d.range_lo);
    detail::put_le<double>(out, d.range_hi);
    for (const auto& s : d.samples) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.label));
        for (double x : s.features) detail::put_le<double>(out, x);
    }
    return out;
}

inline bool is_binary_dataset(std::string_view data) {
    return data.size() >= 4 && std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), data.begin());
}

inline Dataset dataset_from_binary(std::string_view data, const std::string& source = "<dataset>") {
    if (!is_binary_dataset(data)) throw ParseError(source + ": missing ESDS magic");
    detail::LeReader r(data.substr(4), source);
    if (const auto v = r.get<std::uint32_t>("version"); v != 1)
        throw ParseError(source + ": unsupported binary dataset version " + std::to_string(v));
    Dataset d;
    d.n_features = r.get<std::uint32_t>("feature count");
    d.n_classes = r.get<std::uint32_t>("class count");
    const auto n = r.get<std::uint64_t>("sample count");
    d.range_lo = r.get<double>("range");
    d.range_hi = r.get<double>("range");
    if (n > (data.size() / 4)) throw ParseError(source + ": sample count exceeds file size");
    for (std::uint64_t i = 0; i < n; ++i) {
        Sample s;
        s.label = r.get<std::uint32_t>("label");
        s.features.resize(d.n_features);
        for (double& x : s.features) x = r.get<double>("feature");
        d.samples.push_back(std::move(s));
    }
    if (!r.done()) throw ParseError(source + ": trailing bytes after the last sample");
    d.validate(source);
    return d;
}

/// Loads either format, picked by the magic bytes.
inline Dataset load_dataset(const std::string& path) {
    const auto data = read_file(path);
    auto d = is_binary_dataset(data) ? dataset_from_binary(data, path) : dataset_from_text(data, path);
    if (d.samples.empty()) throw ParseError(path + ": dataset has no samples");
    return d;
}

inline void save_dataset(const std::string& path, const Dataset& d, bool binary = false) {
    write_atomic(path, binary ? dataset_to_binary(d) : dataset_to_text(d));
}

/// Two Gaussian blobs, one per class, with per-feature centres a fixed gap
/// apart. Features are clamped to [0, 1].
inline Dataset generate_blobs(std::size_t n, std::size_t features, std::uint64_t seed, double sigma = 0.08) {
    Rng rng(seed);
    std::vector<double> c0(features), c1(features);
    for (std::size_t f = 0; f < features; ++f) {
        c0[f] = rng.uniform(0.15, 0.4);
        c1[f] = rng.uniform(0.6, 0.85);
        if (rng.index(2)) std::swap(c0[f], c1[f]);
    }
    Dataset d{features, 2, 0.0, 1.0, {}};
    for (std::size_t i = 0; i < n; ++i) {
        Sample s{std::vector<double>(features), i % 2};
        const auto& c = s.label ? c1 : c0;
        for (std::size_t f = 0; f < features; ++f) s.features[f] = std::clamp(c[f] + sigma * rng.normal(), 0.0, 1.0);
        d.samples.push_back(std::move(s));
    }
    return d;
}

/// 8x8 seven-segment style digits with jitter: a random one-pixel shift,
/// intensity noise and occasional dropped strokes.
inline Dataset generate_digits(std::size_t n, std::uint64_t seed, double noise = 0.15) {
    // Segments a..g as bit flags per digit.
    static constexpr std::array<std::uint8_t, 10> segs{0x3f, 0x06, 0x5b, 0x4f, 0x66, 0x6d, 0x7d, 0x07, 0x7f, 0x6f};
    auto glyph = [](std::size_t digit) {
        std::array<double, 64> img{};
        auto on = [&](std::size_t r, std::size_t c) { img[r * 8 + c] = 1.0; };
        const auto m = segs[digit];
        for (std::size_t c = 2; c <= 5; ++c) {
            if (m & 0x01) on(1, c);
            if (m & 0x40) on(4, c);
            if (m & 0x08) on(7, c);
        }
        for (std::size_t r = 1; r <= 4; ++r) {
            if (m & 0x20) on(r, 1);
            if (m & 0x02) on(r, 6);
        }
        for (std::size_t r = 4; r <= 7; ++r) {
            if (m & 0x10) on(r, 1);
            if (m & 0x04) on(r, 6);
        }
        return img;
    };
    Rng rng(seed);
    Dataset d{64, 10, 0.0, 1.0, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 10;
        const auto g = glyph(label);
        const int dy = static_cast<int>(rng.index(2)), dx = static_cast<int>(rng.index(3)) - 1;
        Sample s{std::vector<double>(64, 0.0), label};
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                const int sr = r - dy, sc = c - dx;
                const double v = sr >= 0 && sr < 8 && sc >= 0 && sc < 8 ? g[sr * 8 + sc] : 0.0;
                s.features[r * 8 + c] = std::clamp(v * rng.uniform(0.7, 1.0) + noise * rng.uniform01(), 0.0, 1.0);
            }
        d.samples.push_back(std::move(s));
    }
    return d;
}

/// First `n_first` samples and the rest.
inline std::pair<Dataset, Dataset> split(const Dataset& d, std::size_t n_first) {
    Dataset a = d, b = d;
    n_first = std::min(n_first, d.samples.size());
    a.samples.assign(d.samples.begin(), d.samples.begin() + static_cast<std::ptrdiff_t>(n_first));
    b.samples.assign(d.samples.begin() + static_cast<std::ptrdiff_t>(n_first), d.samples.end());
    return {a, b};
}

} // namespace edgesnn::io
