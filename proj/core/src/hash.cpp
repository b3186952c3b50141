// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/hash.hpp"

#include <cstring>

#include <openssl/sha.h>

namespace brq {

std::string sha256_hex(const unsigned char* data, std::size_t len) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(data, len, digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (const unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::vector<unsigned char> doubles_to_bytes(const std::vector<double>& values) {
  std::vector<unsigned char> bytes(values.size() * sizeof(double));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  return bytes;
}

}  // namespace brq
