#include "te/tensor_io.hpp"

namespace te {

void write_tensors(std::ostream& os,
                   const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    bin::write_bytes(os, "TCWT", 4);
    bin::write_le<std::uint16_t>(os, kTcwtVersion);
    bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        bin::write_string(os, name);
        bin::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t->rank()));
        for (int e : t->shape) bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
        for (double v : t->data) bin::write_f32(os, static_cast<float>(v));
    }
}

std::map<std::string, Tensor> read_tensors(std::istream& is) {
    char magic[4];
    bin::read_bytes(is, magic, 4, "TCWT magic");
    if (std::string(magic, 4) != "TCWT") throw IoError("bad magic, not a TCWT file");
    auto version = bin::read_le<std::uint16_t>(is, "TCWT version");
    if (version != kTcwtVersion)
        throw IoError("TCWT version mismatch: file has " + std::to_string(version) +
                      ", expected " + std::to_string(kTcwtVersion));
    auto count = bin::read_le<std::uint32_t>(is, "tensor count");
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = bin::read_string(is, "tensor name");
        auto rank = bin::read_le<std::uint8_t>(is, "tensor rank");
        std::vector<int> shape;
        for (int d = 0; d < rank; ++d)
            shape.push_back(static_cast<int>(bin::read_le<std::uint32_t>(is, "tensor extent")));
        Tensor t(shape);
        for (double& v : t.data) v = static_cast<double>(bin::read_f32(is, "tensor data"));
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

void save_tensors(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    AtomicFile f(path);
    write_tensors(f.stream(), tensors);
    f.commit();
}

std::map<std::string, Tensor> load_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_tensors(is);
}

}  // namespace te
