#pragma once

#include <map>

#include "te/io.hpp"
#include "te/tensor.hpp"

namespace te {

// TCWT container: magic, version u16, tensor count u32, then per tensor
// name (u16 len + UTF-8), rank u8, extents u32[], f32 little-endian data.
constexpr std::uint16_t kTcwtVersion = 1;

void save_tensors(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> load_tensors(const std::filesystem::path& path);

void write_tensors(std::ostream& os,
                   const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> read_tensors(std::istream& is);

}  // namespace te
