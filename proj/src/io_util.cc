// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/io_util.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "latentlens/error.h"

namespace latentlens {

namespace {

void put_bytes(std::ostream& out, const unsigned char* bytes, size_t n) {
  out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, unsigned char* bytes, size_t n) {
  in.read(reinterpret_cast<char*>(bytes), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw FormatError("unexpected end of stream");
  }
}

}  // namespace

void write_u32_le(std::ostream& out, uint32_t value) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  put_bytes(out, b, 4);
}

void write_u64_le(std::ostream& out, uint64_t value) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  put_bytes(out, b, 8);
}

void write_f32_le(std::ostream& out, float value) {
  write_u32_le(out, std::bit_cast<uint32_t>(value));
}

uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

float read_f32_le(std::istream& in) {
  return std::bit_cast<float>(read_u32_le(in));
}

void write_string_lp(std::ostream& out, const std::string& str) {
  write_u32_le(out, static_cast<uint32_t>(str.size()));
  out.write(str.data(), static_cast<std::streamsize>(str.size()));
}

std::string read_string_lp(std::istream& in, uint32_t max_len) {
  const uint32_t len = read_u32_le(in);
  if (len > max_len) {
    throw FormatError("string length " + std::to_string(len) + " exceeds limit");
  }
  std::string str(len, '\0');
  in.read(str.data(), static_cast<std::streamsize>(len));
  if (static_cast<uint32_t>(in.gcount()) != len) {
    throw FormatError("truncated string payload");
  }
  return str;
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(const std::string& str, uint64_t seed) {
  return fnv1a64(str.data(), str.size(), seed);
}

}  // namespace latentlens
