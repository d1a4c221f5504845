#pragma once

#include <optional>
#include <string>
#include <vector>

namespace graphage {

// An RGB image with pixels in [0,1] (row-major h*w*3) and an optional
// age label in years.
struct ImageSample {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // h*w*3
    std::optional<double> age;
    std::string id;

    double pixel(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }
    double& pixel(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
};

}  // namespace graphage
