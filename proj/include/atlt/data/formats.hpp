#pragma once

#include <filesystem>

#include "atlt/data/dataset.hpp"

namespace atlt::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;

// IDX image file (N x H x W unsigned bytes, big-endian header) plus IDX label
// file. Pixels are scaled from [0,255] to [0,1]; the result has one channel.
ImageDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t num_classes = 10, Split split = Split::Train);

// Images only: returns a dataset whose labels are all zero.
ImageDataset load_idx_images(const std::filesystem::path& images);
std::vector<std::size_t> load_idx_labels(const std::filesystem::path& labels);

// Requires a single-channel dataset whose pixels sit on the k/255 grid, so
// that reading the files back reproduces the same floats.
void write_idx(const ImageDataset& dataset, const std::filesystem::path& images, const std::filesystem::path& labels);

// CIFAR-10 binary: 3073-byte records, one label byte followed by 3072 pixel
// bytes in R, G, B plane order, each plane 32x32 row-major.
ImageDataset load_cifar_binary(const std::filesystem::path& path, std::size_t num_classes = 10, Split split = Split::Train);
void write_cifar_binary(const ImageDataset& dataset, const std::filesystem::path& path);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Pixel byte <-> float mapping shared by every loader and writer.
inline float byte_to_unit(unsigned char b) { return static_cast<float>(b) / 255.0f; }
unsigned char unit_to_byte(float v);

}  // namespace atlt::data
