#include "odor/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "odor/core/checksum.hpp"

namespace odor {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'D', 'O', 'R', 'C', 'K', 'P', 'T'};

class Writer {
public:
    template <typename V>
    void put(V value) {
        const auto* p = reinterpret_cast<const std::byte*>(&value);
        bytes.insert(bytes.end(), p, p + sizeof(V));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        const auto* p = reinterpret_cast<const std::byte*>(s.data());
        bytes.insert(bytes.end(), p, p + s.size());
    }
    std::vector<std::byte> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> data) : data_(data) {}
    template <typename V>
    V get() {
        need(sizeof(V));
        V value;
        std::memcpy(&value, data_.data() + pos_, sizeof(V));
        pos_ += sizeof(V);
        return value;
    }
    std::string get_string() {
        const auto len = get<std::uint32_t>();
        need(len);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw CorruptFileError("checkpoint truncated");
    }
    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint) {
    Writer w;
    for (char c : kMagic) w.put(c);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(checkpoint.precision));
    w.put_string(checkpoint.descriptor);
    w.put(static_cast<std::uint32_t>(checkpoint.entries.size()));
    for (const auto& e : checkpoint.entries) {
        if (numel(e.shape) != e.values.size())
            throw ShapeError("checkpoint entry '" + e.name + "' has inconsistent shape");
        w.put_string(e.name);
        w.put(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) w.put(static_cast<std::uint64_t>(d));
        for (double v : e.values) {
            if (checkpoint.precision == Precision::f32) w.put(static_cast<float>(v));
            else w.put(v);
        }
    }
    w.put(crc32(w.bytes));
    return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
    if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw CorruptFileError("not a checkpoint file (bad magic)");
    const auto body = bytes.first(bytes.size() - 4);
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body.size(), 4);
    if (crc32(body) != stored) throw CorruptFileError("checkpoint checksum mismatch");

    Reader r(body);
    r.get<std::uint64_t>();  // magic, already verified
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw UnsupportedFormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint out;
    const auto width = r.get<std::uint32_t>();
    if (width != 4 && width != 8) throw UnsupportedFormatError("unsupported scalar width " + std::to_string(width));
    out.precision = static_cast<Precision>(width);
    out.descriptor = r.get_string();
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        e.name = r.get_string();
        const auto rank = r.get<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
        const std::size_t n = numel(e.shape);
        if (n > body.size()) throw CorruptFileError("checkpoint entry size exceeds file");
        e.values.resize(n);
        for (auto& v : e.values) v = width == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
        out.entries.push_back(std::move(e));
    }
    if (r.position() != body.size()) throw CorruptFileError("trailing bytes in checkpoint");
    return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace odor
