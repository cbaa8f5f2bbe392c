#include "atlt/data/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "atlt/core/errors.hpp"

namespace atlt::data {
namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

struct IdxFile {
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> bytes;
  std::size_t payload = 0;  // offset of the first data byte
};

IdxFile parse_idx(const std::filesystem::path& path, std::uint32_t magic) {
  IdxFile f;
  f.bytes = read_all(path);
  const std::string name = path.filename().string();
  if (f.bytes.size() < 4) throw DataError(name + ": truncated IDX header");
  const std::uint32_t got = be32(f.bytes, 0);
  if (got != magic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bad IDX magic 0x%08x (expected 0x%08x)", got, magic);
    throw DataError(name + ": " + buf);
  }
  const std::size_t ndims = magic & 0xFF;
  f.payload = 4 + 4 * ndims;
  if (f.bytes.size() < f.payload) throw DataError(name + ": truncated IDX header");
  std::size_t expect = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    f.dims.push_back(be32(f.bytes, 4 + 4 * i));
    expect *= f.dims.back();
  }
  if (f.bytes.size() < f.payload + expect) throw DataError(name + ": truncated IDX payload");
  if (f.bytes.size() > f.payload + expect) throw DataError(name + ": trailing bytes after IDX payload");
  return f;
}

}  // namespace

unsigned char unit_to_byte(float v) {
  const float scaled = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return static_cast<unsigned char>(scaled);
}

ImageDataset load_idx_images(const std::filesystem::path& images) {
  const IdxFile f = parse_idx(images, kIdxImagesMagic);
  ImageDataset ds;
  ds.channels = 1;
  ds.height = f.dims[1];
  ds.width = f.dims[2];
  ds.num_classes = 1;
  ds.pixels.resize(static_cast<std::size_t>(f.dims[0]) * ds.height * ds.width);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) ds.pixels[i] = byte_to_unit(f.bytes[f.payload + i]);
  ds.labels.assign(f.dims[0], 0);
  ds.manifest.source = "idx:" + images.string();
  return ds;
}

std::vector<std::size_t> load_idx_labels(const std::filesystem::path& labels) {
  const IdxFile f = parse_idx(labels, kIdxLabelsMagic);
  std::vector<std::size_t> out(f.dims[0]);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.bytes[f.payload + i];
  return out;
}

ImageDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t num_classes,
                      Split split) {
  ImageDataset ds = load_idx_images(images);
  auto ys = load_idx_labels(labels);
  if (ys.size() != ds.size()) {
    throw DataError("IDX image/label count mismatch: " + std::to_string(ds.size()) + " images vs " + std::to_string(ys.size()) + " labels");
  }
  ds.labels = std::move(ys);
  ds.num_classes = num_classes;
  ds.split = split;
  ds.validate();
  ds.manifest.counts = class_histogram(ds);
  return ds;
}

void write_idx(const ImageDataset& dataset, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (dataset.channels != 1) throw DataError("IDX images hold one channel, dataset has " + std::to_string(dataset.channels));
  std::vector<unsigned char> img;
  put_be32(img, kIdxImagesMagic);
  put_be32(img, static_cast<std::uint32_t>(dataset.size()));
  put_be32(img, static_cast<std::uint32_t>(dataset.height));
  put_be32(img, static_cast<std::uint32_t>(dataset.width));
  for (float v : dataset.pixels) img.push_back(unit_to_byte(v));
  std::vector<unsigned char> lab;
  put_be32(lab, kIdxLabelsMagic);
  put_be32(lab, static_cast<std::uint32_t>(dataset.size()));
  for (auto y : dataset.labels) {
    if (y > 255) throw DataError("IDX labels are single bytes");
    lab.push_back(static_cast<unsigned char>(y));
  }
  write_all(images, img);
  write_all(labels, lab);
}

ImageDataset load_cifar_binary(const std::filesystem::path& path, std::size_t num_classes, Split split) {
  const auto bytes = read_all(path);
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(path.filename().string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
  }
  ImageDataset ds;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.manifest.source = "cifar:" + path.string();
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  ds.pixels.resize(n * 3072);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= num_classes) {
      throw DataError("record " + std::to_string(r) + ": label " + std::to_string(rec[0]) + " >= num_classes " + std::to_string(num_classes));
    }
    ds.labels[r] = rec[0];
    for (std::size_t i = 0; i < 3072; ++i) ds.pixels[r * 3072 + i] = byte_to_unit(rec[1 + i]);
  }
  ds.manifest.counts = class_histogram(ds);
  return ds;
}

void write_cifar_binary(const ImageDataset& dataset, const std::filesystem::path& path) {
  if (dataset.channels != 3 || dataset.height != 32 || dataset.width != 32) {
    throw DataError("CIFAR binary records hold 3x32x32 images");
  }
  std::vector<unsigned char> out;
  out.reserve(dataset.size() * kCifarRecordBytes);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    if (dataset.labels[r] > 255) throw DataError("CIFAR labels are single bytes");
    out.push_back(static_cast<unsigned char>(dataset.labels[r]));
    for (float v : dataset.image(r)) out.push_back(unit_to_byte(v));
  }
  write_all(path, out);
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << nlohmann::json(manifest).dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

}  // namespace atlt::data
