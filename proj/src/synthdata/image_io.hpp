// Copyright 2026 The mixocc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixocc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major RGB image, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // (y * width + x) * 3 + channel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.f) {}
  float* pixel(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const float* pixel(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

/// 8-bit RGB PNG. Values are rounded to the nearest 1/255 step.
void write_png(const std::string& path, const Image& img);
/// Reads grayscale, palette, RGB or RGBA PNGs (alpha dropped) at 8 or 16 bits.
Image read_png(const std::string& path);

}  // namespace mixocc
