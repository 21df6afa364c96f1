#pragma once

#include <string>
#include <string_view>

namespace vtank {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// PBKDF2-HMAC-SHA256, hex encoded.
std::string pbkdf2_hex(std::string_view password, std::string_view salt, int iterations = 10000);

/// `bytes` random bytes from the OS CSPRNG, hex encoded.
std::string random_hex(std::size_t bytes);

}  // namespace vtank
