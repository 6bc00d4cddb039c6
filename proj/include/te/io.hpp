#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <type_traits>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace te {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Little-endian scalar I/O. Reads throw IoError naming the stream offset at
// the point of failure so truncation is diagnosable.
namespace bin {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    write_bytes(os, buf, sizeof(T));
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, sizeof(u));
    write_le<std::uint32_t>(os, u);
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    auto at = is.tellg();
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is)
        throw IoError(std::string("truncated read of ") + what + " at offset " +
                      std::to_string(static_cast<long long>(at)));
}

template <class T>
T read_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    read_bytes(is, buf, sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline float read_f32(std::istream& is, const char* what) {
    std::uint32_t u = read_le<std::uint32_t>(is, what);
    float f;
    std::memcpy(&f, &u, sizeof(f));
    return f;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
    auto n = read_le<std::uint16_t>(is, what);
    std::string s(n, '\0');
    if (n) read_bytes(is, s.data(), n, what);
    return s;
}

}  // namespace bin

// Writes through a temp file in the same directory, then renames into place.
class AtomicFile {
public:
    explicit AtomicFile(const std::filesystem::path& target)
        : target_(target), tmp_(target.string() + ".tmp") {
        if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
        os_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!os_) throw IoError("cannot open " + tmp_.string() + " for writing");
    }
    std::ostream& stream() { return os_; }
    void commit() {
        os_.close();
        if (!os_) throw IoError("write failure on " + tmp_.string());
        std::filesystem::rename(tmp_, target_);
        committed_ = true;
    }
    ~AtomicFile() {
        if (!committed_) {
            os_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

private:
    std::filesystem::path target_, tmp_;
    std::ofstream os_;
    bool committed_ = false;
};

}  // namespace te
