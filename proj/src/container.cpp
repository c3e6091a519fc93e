#include "qglab/container.hpp"

#include "qglab/config.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace qglab {

namespace {

const char kMagic[4] = {'Q', 'G', 'S', 'G'};
constexpr uint32_t kVersion = 1;

// All integers little-endian; this writer assumes a little-endian host.
template <typename T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw IoError("container: truncated file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::string take_str(const std::string& buf, size_t& pos, size_t n) {
    if (pos + n > buf.size()) throw IoError("container: truncated file");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
}

}  // namespace

void TensorContainer::add(const std::string& name, std::vector<uint64_t> shape,
                          std::vector<double> data) {
    Entry e;
    e.name = name;
    e.dtype = 1;
    e.shape = std::move(shape);
    e.f64 = std::move(data);
    if (e.count() != e.f64.size()) throw IoError("container: shape/data mismatch for " + name);
    entries_.push_back(std::move(e));
}

void TensorContainer::add_f32(const std::string& name, std::vector<uint64_t> shape,
                              std::vector<float> data) {
    Entry e;
    e.name = name;
    e.dtype = 0;
    e.shape = std::move(shape);
    e.f32 = std::move(data);
    if (e.count() != e.f32.size()) throw IoError("container: shape/data mismatch for " + name);
    entries_.push_back(std::move(e));
}

bool TensorContainer::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const TensorContainer::Entry& TensorContainer::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw IoError("container: missing tensor " + name);
}

const std::vector<double>& TensorContainer::f64(const std::string& name) const {
    const Entry& e = get(name);
    if (e.dtype != 1) throw IoError("container: tensor " + name + " is not f64");
    return e.f64;
}

void TensorContainer::save(const std::string& path) const {
    std::string buf;
    buf.append(kMagic, 4);
    put<uint32_t>(buf, kVersion);
    put<uint32_t>(buf, static_cast<uint32_t>(entries_.size()));

    // Entry table with payload offsets relative to payload start.
    uint64_t offset = 0;
    for (const auto& e : entries_) {
        put<uint16_t>(buf, static_cast<uint16_t>(e.name.size()));
        buf.append(e.name);
        put<uint8_t>(buf, e.dtype);
        put<uint8_t>(buf, static_cast<uint8_t>(e.shape.size()));
        for (uint64_t s : e.shape) put<uint64_t>(buf, s);
        put<uint64_t>(buf, offset);
        offset += e.count() * (e.dtype == 1 ? 8 : 4);
    }
    put<uint64_t>(buf, offset);  // total payload size
    for (const auto& e : entries_) {
        if (e.dtype == 1)
            buf.append(reinterpret_cast<const char*>(e.f64.data()), e.f64.size() * 8);
        else
            buf.append(reinterpret_cast<const char*>(e.f32.data()), e.f32.size() * 4);
    }
    put<uint16_t>(buf, static_cast<uint16_t>(config_hash.size()));
    buf.append(config_hash);
    put<uint64_t>(buf, fnv1a(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("container: cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("container: write failed: " + path);
}

TensorContainer TensorContainer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("container: cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    if (buf.size() < 4 + 4 + 4 + 8) throw IoError("container: file too small: " + path);
    const uint64_t stored = fnv1a(buf.data(), buf.size() - 8);
    uint64_t expect;
    std::memcpy(&expect, buf.data() + buf.size() - 8, 8);
    if (stored != expect) throw IoError("container: checksum mismatch: " + path);

    size_t pos = 0;
    if (take_str(buf, pos, 4) != std::string(kMagic, 4))
        throw IoError("container: bad magic: " + path);
    if (take<uint32_t>(buf, pos) != kVersion) throw IoError("container: unsupported version");
    const uint32_t n_entries = take<uint32_t>(buf, pos);

    TensorContainer c;
    std::vector<uint64_t> offsets;
    for (uint32_t k = 0; k < n_entries; ++k) {
        Entry e;
        const uint16_t name_len = take<uint16_t>(buf, pos);
        e.name = take_str(buf, pos, name_len);
        e.dtype = take<uint8_t>(buf, pos);
        const uint8_t ndim = take<uint8_t>(buf, pos);
        for (uint8_t d = 0; d < ndim; ++d) e.shape.push_back(take<uint64_t>(buf, pos));
        offsets.push_back(take<uint64_t>(buf, pos));
        c.entries_.push_back(std::move(e));
    }
    const uint64_t payload_size = take<uint64_t>(buf, pos);
    const size_t payload_start = pos;
    if (payload_start + payload_size > buf.size()) throw IoError("container: truncated payload");

    for (uint32_t k = 0; k < n_entries; ++k) {
        Entry& e = c.entries_[k];
        const size_t at = payload_start + offsets[k];
        const uint64_t count = e.count();
        if (e.dtype == 1) {
            e.f64.resize(count);
            std::memcpy(e.f64.data(), buf.data() + at, count * 8);
        } else if (e.dtype == 0) {
            e.f32.resize(count);
            std::memcpy(e.f32.data(), buf.data() + at, count * 4);
        } else {
            throw IoError("container: unknown dtype");
        }
    }
    pos = payload_start + payload_size;
    const uint16_t hash_len = take<uint16_t>(buf, pos);
    c.config_hash = take_str(buf, pos, hash_len);
    return c;
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("manifest: cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
    return Config::parse_file(path).items();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("csv: cannot open for writing: " + path);
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

std::string format_double(double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace qglab
