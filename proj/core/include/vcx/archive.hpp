#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vcx/errors.hpp"
#include "vcx/tensor.hpp"

namespace vcx {

enum class DType : std::uint8_t { Float32 = 0, Uint8 = 1 };

/// One named tensor inside an archive. Payload is row-major; exactly one of
/// f32/u8 is populated depending on dtype.
struct ArchiveEntry {
    DType dtype = DType::Float32;
    std::vector<std::uint64_t> shape;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;

    std::uint64_t element_count() const;
};

/// Named tensor container with a bit-exact binary layout:
///   magic "LDVT" | version u32 LE | entry count u32 LE |
///   per entry: name len u16 LE, name bytes, dtype u8, ndim u8,
///              dims u64 LE each, raw payload.
/// Entries are written in name order, so save is canonical.
struct TensorArchive {
    std::map<std::string, ArchiveEntry> entries;

    bool has(const std::string& name) const { return entries.count(name) != 0; }

    void put_f32(const std::string& name, std::vector<std::uint64_t> shape, std::vector<float> data);
    void put_u8(const std::string& name, std::vector<std::uint64_t> shape, std::vector<std::uint8_t> data);
    void put_video(const std::string& name, const VideoTensor& video);
    void put_latent(const std::string& name, const LatentTensor& latent);

    const ArchiveEntry& get(const std::string& name) const;
    VideoTensor get_video(const std::string& name) const;
    LatentTensor get_latent(const std::string& name) const;

    bool operator==(const TensorArchive& other) const;
};

constexpr std::uint32_t kArchiveVersion = 1;

void archive_save(const TensorArchive& archive, const std::string& path);
TensorArchive archive_load(const std::string& path);

std::vector<std::uint8_t> archive_to_bytes(const TensorArchive& archive);
TensorArchive archive_from_bytes(const std::vector<std::uint8_t>& bytes);

/// FNV-1a64 of a file's bytes, as 16 lowercase hex digits. Used as checkpoint
/// content hash. Throws ArchiveError if the file cannot be read.
std::string file_content_hash(const std::string& path);

} // namespace vcx
