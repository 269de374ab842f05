#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vitreforge/tensor.hpp"

namespace vitreforge {

// Ordered map from string keys to tensors plus a small string-to-string
// metadata section. On disk this is the NTA-v1 container:
//
//   bytes 0-3    magic "NTA1"
//   bytes 4-11   unsigned little-endian 64-bit index length L
//   bytes 12..   UTF-8 text index, one record per line:
//                key \t f32 \t d0,d1,... \t offset \t nbytes
//   payload      row-major little-endian f32 at the stated offsets,
//                offsets relative to payload start, 64-byte aligned
//
// Metadata entries ride in the same index with key prefix '%' and dtype
// "str"; their payload is the raw UTF-8 value. Tensor keys may not start
// with '%'. save_archive emits tensors in insertion order followed by
// metadata in lexicographic key order, so output bytes are deterministic.
class NamedTensorArchive {
public:
    void put(const std::string& key, Tensor t);
    bool has(const std::string& key) const;
    const Tensor& get(const std::string& key) const;
    void erase(const std::string& key);

    const std::vector<std::string>& keys() const { return order_; }
    std::size_t size() const { return order_.size(); }

    void set_meta(const std::string& key, const std::string& value);
    std::optional<std::string> meta(const std::string& key) const;
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    std::int64_t total_params() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> entries_;
    std::map<std::string, std::string> metadata_;
};

NamedTensorArchive load_archive(const std::string& path);
void save_archive(const NamedTensorArchive& a, const std::string& path);

// FNV-1a over the payload bytes; used by the weight-reuse audit.
std::uint64_t tensor_checksum(const Tensor& t);

}  // namespace vitreforge
