#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qglab {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Binary tensor container: "QGSG" magic, version, entry table of named
// tensors (f32/f64, shape), little-endian row-major payloads, trailing
// config hash and FNV-1a checksum. Round-trips byte-identically.
class TensorContainer {
  public:
    struct Entry {
        std::string name;
        uint8_t dtype;  // 0 = f32, 1 = f64
        std::vector<uint64_t> shape;
        std::vector<double> f64;
        std::vector<float> f32;

        uint64_t count() const {
            uint64_t c = 1;
            for (uint64_t s : shape) c *= s;
            return c;
        }
    };

    std::string config_hash;

    void add(const std::string& name, std::vector<uint64_t> shape, std::vector<double> data);
    void add_f32(const std::string& name, std::vector<uint64_t> shape, std::vector<float> data);
    void add_scalar(const std::string& name, double value) { add(name, {1}, {value}); }

    bool has(const std::string& name) const;
    const Entry& get(const std::string& name) const;
    const std::vector<double>& f64(const std::string& name) const;
    double scalar(const std::string& name) const { return f64(name).at(0); }

    const std::vector<Entry>& entries() const { return entries_; }

    void save(const std::string& path) const;
    static TensorContainer load(const std::string& path);  // throws IoError on corruption

  private:
    std::vector<Entry> entries_;
};

// Plain-text provenance manifest, sorted key=value lines.
void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_manifest(const std::string& path);

// CSV with a header row.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);  // round-trip-exact formatting

}  // namespace qglab
