// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

namespace latentlens {

// Little-endian primitives. Encoding is explicit so file formats stay
// bit-exact on any host.
void write_u32_le(std::ostream& out, uint32_t value);
void write_u64_le(std::ostream& out, uint64_t value);
void write_f32_le(std::ostream& out, float value);
uint32_t read_u32_le(std::istream& in);
uint64_t read_u64_le(std::istream& in);
float read_f32_le(std::istream& in);

// Length-prefixed (u32 LE) UTF-8 string.
void write_string_lp(std::ostream& out, const std::string& str);
std::string read_string_lp(std::istream& in, uint32_t max_len = 1u << 20);

// Writes `content` to `path` atomically: temp file in the same directory,
// then rename. Interrupted runs never leave a truncated file that parses.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a, used for config hashing and grid seed derivation.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64(const std::string& str, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace latentlens
