#include "graphage/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "graphage/errors.hpp"
#include "graphage/rng.hpp"

namespace graphage {

std::vector<std::size_t> DatasetManifest::indices_of(int split_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (split[i] == split_id) out.push_back(i);
    return out;
}

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

ImageSample decode_image(const std::string& path, std::size_t h, std::size_t w) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw DataError("cannot decode image: " + path);
    // center crop to the target aspect ratio, then resize
    double target_ar = static_cast<double>(w) / static_cast<double>(h);
    double ar = static_cast<double>(img.cols) / static_cast<double>(img.rows);
    cv::Rect roi(0, 0, img.cols, img.rows);
    if (ar > target_ar) {
        roi.width = static_cast<int>(std::lround(img.rows * target_ar));
        roi.x = (img.cols - roi.width) / 2;
    } else if (ar < target_ar) {
        roi.height = static_cast<int>(std::lround(img.cols / target_ar));
        roi.y = (img.rows - roi.height) / 2;
    }
    cv::Mat cropped = img(roi);
    cv::Mat resized;
    cv::resize(cropped, resized, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0,
               cv::INTER_AREA);
    ImageSample sample;
    sample.height = h;
    sample.width = w;
    sample.pixels.resize(h * w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        const auto* row = resized.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; ++x) {
            // OpenCV is BGR
            sample.pixel(y, x, 0) = row[x][2] / 255.0;
            sample.pixel(y, x, 1) = row[x][1] / 255.0;
            sample.pixel(y, x, 2) = row[x][0] / 255.0;
        }
    }
    return sample;
}

}  // namespace

DatasetManifest load_manifest(const std::string& labels_csv, const std::string& image_root,
                              std::size_t h, std::size_t w) {
    std::ifstream in(labels_csv, std::ios::binary);
    if (!in) throw DataError("cannot open labels file: " + labels_csv);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();

    DatasetManifest m;
    m.root = image_root;
    m.label_checksum = fnv1a(content);

    std::istringstream lines(content);
    std::string line;
    if (!std::getline(lines, line) || trim(line) != "filename,age") {
        throw DataError("labels file must start with header 'filename,age': " + labels_csv);
    }
    std::vector<std::string> seen_paths;
    std::size_t lineno = 1;
    while (std::getline(lines, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw DataError("malformed row " + std::to_string(lineno) + " in " + labels_csv);
        }
        std::string rel = trim(line.substr(0, comma));
        std::string age_str = trim(line.substr(comma + 1));
        double age;
        try {
            std::size_t pos = 0;
            age = std::stod(age_str, &pos);
            if (pos != age_str.size()) throw std::invalid_argument(age_str);
        } catch (const std::exception&) {
            throw DataError("non-numeric age '" + age_str + "' at row " + std::to_string(lineno));
        }
        if (!(age >= 0.0 && age <= 120.0)) {
            throw DataError("age " + age_str + " out of range [0,120] at row " + std::to_string(lineno));
        }
        if (std::find(seen_paths.begin(), seen_paths.end(), rel) != seen_paths.end()) {
            throw DataError("duplicate path in labels file: " + rel);
        }
        seen_paths.push_back(rel);

        std::string full = (std::filesystem::path(image_root) / rel).string();
        if (!std::filesystem::exists(full)) {
            m.load_errors.push_back("missing file: " + full);
            continue;
        }
        try {
            ImageSample sample = decode_image(full, h, w);
            sample.age = age;
            sample.id = rel;
            m.samples.push_back(std::move(sample));
        } catch (const DataError& e) {
            m.load_errors.push_back(e.what());
        }
    }
    m.split.assign(m.samples.size(), kSplitNone);
    return m;
}

double synthetic_label(const ImageSample& img) {
    // low-frequency band: mean of 4x4 block averages of the luminance,
    // which equals the global luminance mean when blocks tile the image
    double acc = 0.0;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            acc += (img.pixel(y, x, 0) + img.pixel(y, x, 1) + img.pixel(y, x, 2)) / 3.0;
    return 100.0 * acc / static_cast<double>(img.height * img.width);
}

DatasetManifest make_synthetic(std::size_t count, std::size_t h, std::size_t w,
                               std::uint64_t seed) {
    if (count == 0) throw ConfigError("make_synthetic: count must be >= 1");
    DatasetManifest m;
    m.root = "<synthetic>";
    m.samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng = make_rng(seed, 0x73796e00ULL + s);  // per-sample stream
        ImageSample img;
        img.height = h;
        img.width = w;
        img.id = "synthetic-" + std::to_string(s);
        double base = 0.25 + 0.5 * uniform(rng);
        img.pixels.assign(h * w * 3, base);
        const int blobs = 4;
        for (int b = 0; b < blobs; ++b) {
            double cx = uniform(rng) * static_cast<double>(w);
            double cy = uniform(rng) * static_cast<double>(h);
            double sigma = (0.10 + 0.20 * uniform(rng)) * static_cast<double>(h);
            double amp = (uniform(rng) - 0.5) * 0.5;
            double chan[3] = {0.8 + 0.4 * uniform(rng), 0.8 + 0.4 * uniform(rng),
                              0.8 + 0.4 * uniform(rng)};
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double dx = (static_cast<double>(x) - cx) / sigma;
                    double dy = (static_cast<double>(y) - cy) / sigma;
                    double g = amp * std::exp(-0.5 * (dx * dx + dy * dy));
                    for (std::size_t c = 0; c < 3; ++c) img.pixel(y, x, c) += g * chan[c];
                }
        }
        for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
        img.age = synthetic_label(img);
        m.samples.push_back(std::move(img));
    }
    m.split.assign(m.samples.size(), kSplitNone);
    return m;
}

void assign_splits(DatasetManifest& manifest, const std::array<double, 3>& fractions,
                   std::uint64_t seed) {
    double total = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(total - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));
    }
    const std::size_t n = manifest.samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, /*tag=*/0x73706c74ULL);  // split stream
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(order[i - 1], order[j]);
    }
    // contiguous slices with cumulative rounding so the splits are exhaustive
    std::array<std::size_t, 3> bounds{};
    double cum = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
        cum += fractions[s];
        bounds[s] = static_cast<std::size_t>(std::lround(cum * static_cast<double>(n)));
    }
    bounds[2] = n;
    manifest.split.assign(n, kSplitNone);
    std::size_t begin = 0;
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = begin; i < bounds[static_cast<std::size_t>(s)]; ++i)
            manifest.split[order[i]] = s;
        if (fractions[static_cast<std::size_t>(s)] > 0.0 &&
            bounds[static_cast<std::size_t>(s)] == begin) {
            manifest.warnings.push_back("split " + std::to_string(s) +
                                        " is empty for fraction " +
                                        std::to_string(fractions[static_cast<std::size_t>(s)]));
        }
        begin = bounds[static_cast<std::size_t>(s)];
    }
}

}  // namespace graphage
