#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace rvm::binio {

// Little-endian encoding regardless of host order.
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);

// 64-bit FNV-1a; used for config hashes.
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace rvm::binio
