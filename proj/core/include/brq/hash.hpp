// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#ifndef BRQ_HASH_HPP
#define BRQ_HASH_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace brq {

// Hex SHA-256 digest of a byte buffer (OpenSSL-backed).
std::string sha256_hex(const unsigned char* data, std::size_t len);
std::string sha256_hex(const std::vector<unsigned char>& bytes);

// Raw little-endian bytes of a double vector, for hashing numeric assets.
std::vector<unsigned char> doubles_to_bytes(const std::vector<double>& values);

}  // namespace brq

#endif  // BRQ_HASH_HPP
