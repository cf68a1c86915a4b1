#include "punit/io_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "punit/errors.hpp"

namespace punit {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed: " + path);
    return bytes;
}

std::string read_file_text(const std::string& path) {
    auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

static void write_atomic_impl(const std::string& path, const char* data, std::size_t size) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open file for writing: " + tmp);
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) throw io_error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw io_error("cannot replace file: " + path + " (" + ec.message() + ")");
    }
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    write_atomic_impl(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_file_atomic(const std::string& path, const std::string& text) {
    write_atomic_impl(path, text.data(), text.size());
}

} // namespace punit
