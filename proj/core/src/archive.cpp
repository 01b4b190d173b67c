#include "vcx/archive.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vcx/rng.hpp"

namespace vcx {

namespace {

const char kMagic[4] = {'L', 'D', 'V', 'T'};

void append_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
}

void append_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void append_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t n) : data_(data), size_(n) {}

    void read(void* out, std::size_t n) {
        if (pos_ + n > size_) throw ArchiveError("corrupt archive: truncated file");
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }
    std::uint16_t read_u16le() {
        std::uint8_t b[2];
        read(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t read_u32le() {
        std::uint8_t b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::uint64_t read_u64le() {
        std::uint8_t b[8];
        read(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    bool at_end() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

std::uint64_t ArchiveEntry::element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return n;
}

void TensorArchive::put_f32(const std::string& name, std::vector<std::uint64_t> shape,
                            std::vector<float> data) {
    ArchiveEntry e;
    e.dtype = DType::Float32;
    e.shape = std::move(shape);
    e.f32 = std::move(data);
    if (e.f32.size() != e.element_count())
        throw ShapeError("archive entry '" + name + "': payload size does not match shape");
    entries[name] = std::move(e);
}

void TensorArchive::put_u8(const std::string& name, std::vector<std::uint64_t> shape,
                           std::vector<std::uint8_t> data) {
    ArchiveEntry e;
    e.dtype = DType::Uint8;
    e.shape = std::move(shape);
    e.u8 = std::move(data);
    if (e.u8.size() != e.element_count())
        throw ShapeError("archive entry '" + name + "': payload size does not match shape");
    entries[name] = std::move(e);
}

void TensorArchive::put_video(const std::string& name, const VideoTensor& video) {
    put_f32(name, {video.frames, video.height, video.width, video.channels}, video.values);
}

void TensorArchive::put_latent(const std::string& name, const LatentTensor& latent) {
    put_f32(name, {latent.frames, latent.height, latent.width, latent.channels}, latent.values);
}

const ArchiveEntry& TensorArchive::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw StateError("archive has no entry named '" + name + "'");
    return it->second;
}

VideoTensor TensorArchive::get_video(const std::string& name) const {
    const ArchiveEntry& e = get(name);
    if (e.dtype != DType::Float32 || e.shape.size() != 4)
        throw ShapeError("archive entry '" + name + "' is not a 4-d float32 tensor");
    VideoTensor v;
    v.frames = e.shape[0];
    v.height = e.shape[1];
    v.width = e.shape[2];
    v.channels = e.shape[3];
    v.values = e.f32;
    return v;
}

LatentTensor TensorArchive::get_latent(const std::string& name) const {
    const ArchiveEntry& e = get(name);
    if (e.dtype != DType::Float32 || e.shape.size() != 4)
        throw ShapeError("archive entry '" + name + "' is not a 4-d float32 tensor");
    LatentTensor z;
    z.frames = e.shape[0];
    z.height = e.shape[1];
    z.width = e.shape[2];
    z.channels = e.shape[3];
    z.values = e.f32;
    return z;
}

bool TensorArchive::operator==(const TensorArchive& other) const {
    if (entries.size() != other.entries.size()) return false;
    auto a = entries.begin();
    auto b = other.entries.begin();
    for (; a != entries.end(); ++a, ++b) {
        if (a->first != b->first) return false;
        const ArchiveEntry& x = a->second;
        const ArchiveEntry& y = b->second;
        if (x.dtype != y.dtype || x.shape != y.shape) return false;
        if (x.dtype == DType::Float32) {
            if (x.f32.size() != y.f32.size()) return false;
            if (!x.f32.empty() &&
                std::memcmp(x.f32.data(), y.f32.data(), x.f32.size() * sizeof(float)) != 0)
                return false;
        } else {
            if (x.u8 != y.u8) return false;
        }
    }
    return true;
}

std::vector<std::uint8_t> archive_to_bytes(const TensorArchive& archive) {
    std::vector<std::uint8_t> out;
    append_bytes(out, kMagic, 4);
    append_u32le(out, kArchiveVersion);
    if (archive.entries.size() > 0xffffffffull) throw ArchiveError("too many archive entries");
    append_u32le(out, static_cast<std::uint32_t>(archive.entries.size()));
    for (const auto& [name, e] : archive.entries) {
        if (name.size() > 0xffff) throw ArchiveError("archive entry name too long: " + name);
        append_u16le(out, static_cast<std::uint16_t>(name.size()));
        append_bytes(out, name.data(), name.size());
        out.push_back(static_cast<std::uint8_t>(e.dtype));
        if (e.shape.size() > 0xff) throw ArchiveError("archive entry has too many dimensions");
        out.push_back(static_cast<std::uint8_t>(e.shape.size()));
        for (std::uint64_t d : e.shape) append_u64le(out, d);
        if (e.dtype == DType::Float32) {
            append_bytes(out, e.f32.data(), e.f32.size() * sizeof(float));
        } else {
            append_bytes(out, e.u8.data(), e.u8.size());
        }
    }
    return out;
}

TensorArchive archive_from_bytes(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes.data(), bytes.size());
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ArchiveError("corrupt archive: bad magic bytes");
    std::uint32_t version = r.read_u32le();
    if (version != kArchiveVersion)
        throw VersionError("unsupported archive version " + std::to_string(version));
    std::uint32_t count = r.read_u32le();
    TensorArchive archive;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = r.read_u16le();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        std::uint8_t dtype_code;
        r.read(&dtype_code, 1);
        if (dtype_code > 1)
            throw VersionError("unknown dtype code " + std::to_string(dtype_code) +
                               " for entry '" + name + "'");
        std::uint8_t ndim;
        r.read(&ndim, 1);
        ArchiveEntry e;
        e.dtype = static_cast<DType>(dtype_code);
        e.shape.resize(ndim);
        std::uint64_t n = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            e.shape[d] = r.read_u64le();
            n *= e.shape[d];
        }
        if (archive.entries.count(name))
            throw ArchiveError("corrupt archive: duplicate entry name '" + name + "'");
        if (e.dtype == DType::Float32) {
            e.f32.resize(n);
            r.read(e.f32.data(), n * sizeof(float));
        } else {
            e.u8.resize(n);
            r.read(e.u8.data(), n);
        }
        archive.entries[name] = std::move(e);
    }
    if (!r.at_end()) throw ArchiveError("corrupt archive: trailing bytes after last entry");
    return archive;
}

void archive_save(const TensorArchive& archive, const std::string& path) {
    std::vector<std::uint8_t> bytes = archive_to_bytes(archive);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArchiveError("write failed for '" + path + "'");
}

TensorArchive archive_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return archive_from_bytes(bytes);
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot open '" + path + "' for hashing");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace vcx
