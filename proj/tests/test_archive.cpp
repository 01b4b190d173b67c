#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vcx/archive.hpp"
#include "vcx/rng.hpp"

using namespace vcx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "vcx_archive_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("empty archive is header-only and round-trips") {
    TensorArchive a;
    auto bytes = archive_to_bytes(a);
    CHECK(bytes.size() == 12); // magic + version + count
    TensorArchive b = archive_from_bytes(bytes);
    CHECK(b.entries.empty());
    CHECK(a == b);
}

TEST_CASE("single 2x2 tensor round-trips bitwise") {
    TensorArchive a;
    a.put_f32("m", {2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
    const auto path = temp_file("single.ldvt");
    archive_save(a, path.string());
    TensorArchive b = archive_load(path.string());
    CHECK(a == b);
    CHECK(b.get("m").shape == std::vector<std::uint64_t>{2, 2});
}

TEST_CASE("truncated file raises a corrupt-archive error") {
    TensorArchive a;
    a.put_f32("m", {4}, {1, 2, 3, 4});
    auto bytes = archive_to_bytes(a);
    bytes.resize(bytes.size() - 5);
    CHECK_THROWS_AS(archive_from_bytes(bytes), ArchiveError);
}

TEST_CASE("bad magic raises a corrupt-archive error") {
    TensorArchive a;
    auto bytes = archive_to_bytes(a);
    bytes[0] = 'X';
    CHECK_THROWS_AS(archive_from_bytes(bytes), ArchiveError);
}

TEST_CASE("unknown dtype code raises a version error") {
    TensorArchive a;
    a.put_u8("m", {2}, {1, 2});
    auto bytes = archive_to_bytes(a);
    // dtype byte sits right after the 12-byte header, name length and name
    const std::size_t dtype_pos = 12 + 2 + 1;
    REQUIRE(bytes[dtype_pos] == 1);
    bytes[dtype_pos] = 9;
    CHECK_THROWS_AS(archive_from_bytes(bytes), VersionError);
}

TEST_CASE("unknown version raises a version error") {
    TensorArchive a;
    auto bytes = archive_to_bytes(a);
    bytes[4] = 99;
    CHECK_THROWS_AS(archive_from_bytes(bytes), VersionError);
}

TEST_CASE("property: random shapes and dtypes round-trip bitwise") {
    RandomStream stream(SeedSpec{2024, "archive-prop"});
    for (int trial = 0; trial < 30; ++trial) {
        TensorArchive a;
        const std::size_t entries = 1 + stream.next_below(4);
        for (std::size_t e = 0; e < entries; ++e) {
            const std::size_t ndim = 1 + stream.next_below(4);
            std::vector<std::uint64_t> shape(ndim);
            std::uint64_t n = 1;
            for (auto& d : shape) {
                d = 1 + stream.next_below(5);
                n *= d;
            }
            const std::string name = "t" + std::to_string(e);
            if (stream.next_below(2) == 0) {
                std::vector<float> data(n);
                for (auto& v : data) v = static_cast<float>(stream.next_range(-10.0, 10.0));
                a.put_f32(name, shape, std::move(data));
            } else {
                std::vector<std::uint8_t> data(n);
                for (auto& v : data) v = static_cast<std::uint8_t>(stream.next_below(256));
                a.put_u8(name, shape, std::move(data));
            }
        }
        TensorArchive b = archive_from_bytes(archive_to_bytes(a));
        CHECK(a == b);
    }
}

TEST_CASE("non-finite payloads survive the round trip") {
    TensorArchive a;
    a.put_f32("weird", {3}, {std::numeric_limits<float>::quiet_NaN(),
                             std::numeric_limits<float>::infinity(), -0.0f});
    TensorArchive b = archive_from_bytes(archive_to_bytes(a));
    CHECK(a == b);
}

TEST_CASE("file content hash is stable and sensitive") {
    const auto path = temp_file("hash.ldvt");
    TensorArchive a;
    a.put_f32("m", {2}, {1.0f, 2.0f});
    archive_save(a, path.string());
    const std::string h1 = file_content_hash(path.string());
    CHECK(h1 == file_content_hash(path.string()));
    a.put_f32("m", {2}, {1.0f, 2.5f});
    archive_save(a, path.string());
    CHECK(h1 != file_content_hash(path.string()));
}
