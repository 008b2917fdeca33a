#include "oralnet/weight_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>

#include "byte_io.hpp"
#include "oralnet/errors.hpp"

namespace oralnet {

void WeightStore::insert(std::string name, Tensor tensor) {
    if (index_.count(name)) throw UsageError("duplicate tensor name: " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(tensor));
}

void WeightStore::set(const std::string& name, Tensor tensor) {
    if (auto it = index_.find(name); it != index_.end()) {
        entries_[it->second].second = std::move(tensor);
        return;
    }
    insert(name, std::move(tensor));
}

const Tensor* WeightStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
}

const Tensor& WeightStore::at(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw MissingWeightError(name);
}

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr char kStoreMagic[4] = {'T', 'K', 'W', 'S'};
constexpr char kRawMagic[4] = {'T', 'K', 'R', 'T'};

void write_record(ByteWriter& w, const std::string& name, const Tensor& tensor) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
        throw UsageError("tensor name longer than 65535 bytes");
    if (tensor.rank() > kMaxRank) throw ShapeError("tensor rank exceeds 4");
    if (shape_elements(tensor.shape()) != tensor.size())
        throw ShapeError("tensor '" + name + "' shape does not match its payload");
    w.integer(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.integer(static_cast<std::uint8_t>(DType::float32));
    w.integer(static_cast<std::uint8_t>(tensor.rank()));
    for (auto d : tensor.shape()) w.integer(static_cast<std::uint64_t>(d));
    w.floats(tensor.data());
}

std::pair<std::string, Tensor> read_record(ByteReader& r) {
    const auto name_len = r.integer<std::uint16_t>();
    const auto* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const auto dtype = r.integer<std::uint8_t>();
    if (dtype != static_cast<std::uint8_t>(DType::float32))
        throw FormatError("unknown dtype " + std::to_string(dtype) + " for tensor '" + name + "'");
    const auto rank = r.integer<std::uint8_t>();
    if (rank > kMaxRank)
        throw FormatError("rank " + std::to_string(rank) + " exceeds 4 for tensor '" + name + "'");
    Tensor::Shape shape(rank);
    std::vector<std::uint64_t> extents(rank);
    for (auto& e : extents) e = r.integer<std::uint64_t>();
    const bool empty = std::find(extents.begin(), extents.end(), 0) != extents.end();
    // reject sizes that cannot fit in what is left before allocating anything
    const std::uint64_t limit = r.remaining() / 4;
    std::uint64_t elements = empty ? 0 : 1;
    for (std::size_t i = 0; i < rank; ++i) {
        if (!empty && elements > limit / extents[i]) throw FormatError("truncated");
        if (!empty) elements *= extents[i];
        if (extents[i] > std::numeric_limits<std::size_t>::max()) throw FormatError("extent too large");
        shape[i] = static_cast<std::size_t>(extents[i]);
    }
    const auto* payload = r.take(elements * 4);
    std::vector<float> values = detail::decode_floats(payload, elements);
    return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

std::vector<std::uint8_t> slurp(std::istream& in) {
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    if (in.bad()) throw IoError("read failed");
    return bytes;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

void check_magic(ByteReader& r, const char (&magic)[4]) {
    if (r.remaining() < 4 || std::memcmp(r.take(4), magic, 4) != 0) throw FormatError("bad magic");
}

}  // namespace

std::uint64_t write_weights(const WeightStore& store, std::ostream& out) {
    ByteWriter w(out);
    w.bytes(kStoreMagic, 4);
    w.integer(kWeightFormatVersion);
    if (store.size() > std::numeric_limits<std::uint32_t>::max())
        throw UsageError("too many tensors for one store");
    w.integer(static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, tensor] : store) write_record(w, name, tensor);
    return w.count();
}

void write_weights_file(const WeightStore& store, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_weights(store, out);
    out.close();
    if (!out) throw IoError("write failed: " + path.string());
}

WeightStore read_weights_bytes(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    check_magic(r, kStoreMagic);
    const auto version = r.integer<std::uint8_t>();
    if (version != kWeightFormatVersion)
        throw FormatError("unsupported version " + std::to_string(version));
    const auto count = r.integer<std::uint32_t>();
    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, tensor] = read_record(r);
        if (store.contains(name)) throw FormatError("duplicate tensor name '" + name + "'");
        store.insert(std::move(name), std::move(tensor));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last tensor");
    return store;
}

WeightStore read_weights(std::istream& in) { return read_weights_bytes(slurp(in)); }

WeightStore read_weights_file(const std::filesystem::path& path) {
    return read_weights_bytes(read_file_bytes(path));
}

std::uint64_t write_raw_tensor(const Tensor& tensor, std::ostream& out) {
    ByteWriter w(out);
    w.bytes(kRawMagic, 4);
    write_record(w, "", tensor);
    return w.count();
}

void write_raw_tensor_file(const Tensor& tensor, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_raw_tensor(tensor, out);
    out.close();
    if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_raw_tensor_bytes(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    check_magic(r, kRawMagic);
    auto record = read_record(r);
    if (!r.at_end()) throw FormatError("trailing bytes after raw tensor");
    return std::move(record.second);
}

Tensor read_raw_tensor(std::istream& in) { return read_raw_tensor_bytes(slurp(in)); }

Tensor read_raw_tensor_file(const std::filesystem::path& path) {
    return read_raw_tensor_bytes(read_file_bytes(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return slurp(in);
}

}  // namespace oralnet
