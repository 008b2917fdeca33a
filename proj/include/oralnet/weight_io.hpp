#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oralnet/tensor.hpp"

namespace oralnet {

/// Ordered name -> tensor table. Iteration follows insertion (= file) order.
class WeightStore {
public:
    using Entry = std::pair<std::string, Tensor>;

    /// Throws UsageError if the name is already present.
    void insert(std::string name, Tensor tensor);
    /// Inserts or overwrites in place (position kept).
    void set(const std::string& name, Tensor tensor);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor* find(const std::string& name) const;
    /// Throws MissingWeightError.
    const Tensor& at(const std::string& name) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    friend bool operator==(const WeightStore& a, const WeightStore& b) {
        return a.entries_ == b.entries_;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class DType : std::uint8_t { float32 = 0 };

inline constexpr std::uint8_t kWeightFormatVersion = 1;

// .tkws:  "TKWS" | u8 version | u32 count | count x record
// .tkrt:  "TKRT" | record
// record: u16 name length | name bytes | u8 dtype | u8 rank | rank x u64 extent | payload
// All integers and payload floats are little-endian.

std::uint64_t write_weights(const WeightStore& store, std::ostream& out);
void write_weights_file(const WeightStore& store, const std::filesystem::path& path);

/// Parses a complete .tkws image. Malformed input raises FormatError
/// ("bad magic", "truncated", unknown version or dtype).
WeightStore read_weights(std::istream& in);
WeightStore read_weights_bytes(const std::vector<std::uint8_t>& bytes);
WeightStore read_weights_file(const std::filesystem::path& path);

std::uint64_t write_raw_tensor(const Tensor& tensor, std::ostream& out);
void write_raw_tensor_file(const Tensor& tensor, const std::filesystem::path& path);
Tensor read_raw_tensor(std::istream& in);
Tensor read_raw_tensor_bytes(const std::vector<std::uint8_t>& bytes);
Tensor read_raw_tensor_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace oralnet
