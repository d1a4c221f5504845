#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graphage/sample.hpp"

namespace graphage {

inline constexpr int kSplitTrain = 0;
inline constexpr int kSplitVal = 1;
inline constexpr int kSplitTest = 2;
inline constexpr int kSplitNone = -1;

struct DatasetManifest {
    std::string root;
    std::vector<ImageSample> samples;     // decoded, pixels in [0,1]
    std::vector<int> split;               // kSplit* per sample
    std::uint64_t label_checksum = 0;     // FNV-1a of the labels file
    std::vector<std::string> load_errors; // one entry per skipped file
    std::vector<std::string> warnings;

    std::vector<std::size_t> indices_of(int split_id) const;
};

// Reads a `filename,age` CSV and decodes every image as 8-bit RGB, center
// cropped and resized to h x w, pixel values scaled to [0,1]. Missing or
// undecodable files are reported in load_errors; invalid ages throw DataError.
DatasetManifest load_manifest(const std::string& labels_csv, const std::string& image_root,
                              std::size_t h, std::size_t w);

// Label of a synthetic sample: 100 x mean of the low-frequency (block
// averaged) luminance band. Pure in the pixel content.
double synthetic_label(const ImageSample& img);

// Seeded smooth random blob images whose age labels follow synthetic_label.
DatasetManifest make_synthetic(std::size_t count, std::size_t h, std::size_t w,
                               std::uint64_t seed);

// Seeded shuffle then contiguous train/val/test slicing. Fractions must sum
// to 1 within 1e-9; a degenerate empty split produces a warning.
void assign_splits(DatasetManifest& manifest, const std::array<double, 3>& fractions,
                   std::uint64_t seed);

}  // namespace graphage
