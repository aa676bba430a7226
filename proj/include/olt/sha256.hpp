#ifndef OLT_SHA256_HPP
#define OLT_SHA256_HPP

#include <filesystem>
#include <string>

namespace olt {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_file_hex(const std::filesystem::path& path);

} // namespace olt

#endif // OLT_SHA256_HPP
