#include "collabdm/serialize.hpp"

#include <fstream>

namespace collabdm {

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("short write to " + path.string());
  }
}

void encode_tensor(ByteWriter& w, const Tensor& t) {
  w.magic("CDT1");
  w.u8(0); // f32
  w.u8(static_cast<uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    w.u32(static_cast<uint32_t>(t.dim(i)));
  }
  for (int64_t i = 0; i < t.size(); ++i) {
    w.f32(t[i]);
  }
}

Tensor decode_tensor(ByteReader& r) {
  r.expect_magic("CDT1", "tensor record");
  const uint8_t dtype = r.u8();
  if (dtype > 1) {
    throw FormatError("tensor record: unknown dtype " +
                      std::to_string(dtype));
  }
  const uint8_t rank = r.u8();
  if (rank < 1 || rank > 4) {
    throw FormatError("tensor record: rank " + std::to_string(rank) +
                      " out of range 1..4");
  }
  std::vector<int> shape(rank);
  int64_t count = 1;
  for (auto& d : shape) {
    d = static_cast<int>(r.u32());
    count *= d;
  }
  Tensor t(shape);
  if (dtype == 0) {
    for (int64_t i = 0; i < count; ++i) {
      t[i] = r.f32();
    }
  } else {
    for (int64_t i = 0; i < count; ++i) {
      t[i] = static_cast<float>(r.u8()) / 255.0f;
    }
  }
  return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  ByteWriter w;
  encode_tensor(w, t);
  write_file_bytes(path, w.bytes());
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  Tensor t = decode_tensor(r);
  r.expect_end("tensor payload");
  return t;
}

void write_label_file(const std::filesystem::path& path,
                      const std::vector<int>& labels) {
  ByteWriter w;
  w.magic("CDL1");
  w.u32(static_cast<uint32_t>(labels.size()));
  for (int v : labels) {
    if (v < 0 || v > 0xFFFF) {
      throw InputError("label " + std::to_string(v) +
                       " does not fit the u16 label format");
    }
    w.u16(static_cast<uint16_t>(v));
  }
  write_file_bytes(path, w.bytes());
}

std::vector<int> read_label_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  r.expect_magic("CDL1", "label file");
  const uint32_t count = r.u32();
  std::vector<int> labels(count);
  for (auto& v : labels) {
    v = r.u16();
  }
  r.expect_end("label payload");
  return labels;
}

} // namespace collabdm
