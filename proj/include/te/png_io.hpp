#pragma once

#include <filesystem>
#include <vector>

namespace te {

// RGB image, row-major, channels in [0,1]. Alpha is dropped on load.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // height*width*3

    double& at(int y, int x, int c) {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

// 2x nearest-neighbor upscale, used to bring 8-px tiles to the 16-px grid.
Image upscale2x(const Image& img);

}  // namespace te
