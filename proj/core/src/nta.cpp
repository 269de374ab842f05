#include "vitreforge/nta.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vitreforge/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "NTA-v1 I/O assumes a little-endian host");

namespace vitreforge {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'A', '1'};
constexpr std::uint64_t kAlign = 64;

bool key_ok(const std::string& key) {
    if (key.empty()) return false;
    for (unsigned char c : key) {
        if (c < 0x20 || c > 0x7e) return false;  // printable ASCII, excludes \t \n
    }
    return true;
}

std::uint64_t align_up(std::uint64_t v) { return (v + kAlign - 1) / kAlign * kAlign; }

struct IndexRecord {
    std::string key;
    std::string dtype;
    std::vector<std::int64_t> dims;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
};

IndexRecord parse_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (fields.size() != 5) {
        throw FormatError("NTA index line " + std::to_string(lineno) + ": expected 5 fields, got " +
                          std::to_string(fields.size()));
    }
    IndexRecord r;
    r.key = fields[0];
    r.dtype = fields[1];
    if (!key_ok(r.key)) {
        throw FormatError("NTA index line " + std::to_string(lineno) + ": invalid key");
    }
    const bool is_meta = r.key[0] == '%';
    try {
        // Metadata records carry the byte length in the dims field; only
        // tensor records have real (positive) dimensions.
        if (!is_meta && !fields[2].empty()) {
            std::stringstream ds(fields[2]);
            std::string tok;
            while (std::getline(ds, tok, ',')) {
                const std::int64_t d = std::stoll(tok);
                if (d <= 0) throw FormatError("non-positive dim");
                r.dims.push_back(d);
            }
        }
        r.offset = std::stoull(fields[3]);
        r.nbytes = std::stoull(fields[4]);
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("NTA index line " + std::to_string(lineno) + ": unparseable record for key '" +
                          r.key + "'");
    }
    return r;
}

}  // namespace

void NamedTensorArchive::put(const std::string& key, Tensor t) {
    if (!key_ok(key)) throw FormatError("archive key must be nonempty printable ASCII: '" + key + "'");
    if (key[0] == '%') throw FormatError("tensor keys may not start with '%': '" + key + "'");
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        order_.push_back(key);
        entries_.emplace(key, std::move(t));
    } else {
        it->second = std::move(t);
    }
}

bool NamedTensorArchive::has(const std::string& key) const { return entries_.count(key) != 0; }

const Tensor& NamedTensorArchive::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw SchemaError("archive has no tensor '" + key + "'");
    return it->second;
}

void NamedTensorArchive::erase(const std::string& key) {
    entries_.erase(key);
    for (auto it = order_.begin(); it != order_.end(); ++it) {
        if (*it == key) {
            order_.erase(it);
            break;
        }
    }
}

void NamedTensorArchive::set_meta(const std::string& key, const std::string& value) {
    if (!key_ok(key)) throw FormatError("metadata key must be nonempty printable ASCII");
    metadata_[key] = value;
}

std::optional<std::string> NamedTensorArchive::meta(const std::string& key) const {
    auto it = metadata_.find(key);
    if (it == metadata_.end()) return std::nullopt;
    return it->second;
}

std::int64_t NamedTensorArchive::total_params() const {
    std::int64_t n = 0;
    for (const auto& k : order_) n += entries_.at(k).numel();
    return n;
}

void save_archive(const NamedTensorArchive& a, const std::string& path) {
    // Lay out payload offsets first, then emit index + payload in one pass.
    struct Slot {
        const std::string* key;
        const Tensor* tensor;         // null for metadata slots
        const std::string* meta_val;  // null for tensor slots
        std::uint64_t offset;
        std::uint64_t nbytes;
    };
    std::vector<Slot> slots;
    std::uint64_t cursor = 0;
    for (const auto& key : a.keys()) {
        const Tensor& t = a.get(key);
        const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * 4;
        const std::uint64_t off = align_up(cursor);
        slots.push_back({&key, &t, nullptr, off, nbytes});
        cursor = off + nbytes;
    }
    for (const auto& [mk, mv] : a.metadata()) {
        const std::uint64_t off = align_up(cursor);
        slots.push_back({&mk, nullptr, &mv, off, mv.size()});
        cursor = off + mv.size();
    }

    std::ostringstream index;
    for (const Slot& s : slots) {
        if (s.tensor) {
            index << *s.key << '\t' << "f32" << '\t';
            for (std::size_t i = 0; i < s.tensor->shape.size(); ++i) {
                if (i) index << ',';
                index << s.tensor->shape[i];
            }
        } else {
            index << '%' << *s.key << '\t' << "str" << '\t' << s.nbytes;
        }
        index << '\t' << s.offset << '\t' << s.nbytes << '\n';
    }
    const std::string index_text = index.str();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    const std::uint64_t index_len = index_text.size();
    out.write(reinterpret_cast<const char*>(&index_len), 8);
    out.write(index_text.data(), static_cast<std::streamsize>(index_text.size()));

    std::uint64_t written = 0;
    static const char zeros[kAlign] = {};
    for (const Slot& s : slots) {
        if (s.offset > written) {
            out.write(zeros, static_cast<std::streamsize>(s.offset - written));
            written = s.offset;
        }
        if (s.tensor) {
            out.write(reinterpret_cast<const char*>(s.tensor->data.data()),
                      static_cast<std::streamsize>(s.nbytes));
        } else {
            out.write(s.meta_val->data(), static_cast<std::streamsize>(s.nbytes));
        }
        written += s.nbytes;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

NamedTensorArchive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    char magic[4];
    std::uint64_t index_len = 0;
    if (file_size < 12 || !in.read(magic, 4) ||
        !in.read(reinterpret_cast<char*>(&index_len), 8)) {
        throw FormatError("not an NTA-v1 file (too short): " + path);
    }
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad magic, not an NTA-v1 file: " + path);
    }
    if (12 + index_len > file_size) {
        throw CorruptionError("index length " + std::to_string(index_len) +
                              " exceeds file size in " + path);
    }
    std::string index_text(index_len, '\0');
    if (!in.read(index_text.data(), static_cast<std::streamsize>(index_len))) {
        throw CorruptionError("short read of index in " + path);
    }
    const std::uint64_t payload_base = 12 + index_len;
    const std::uint64_t payload_size = file_size - payload_base;

    NamedTensorArchive a;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < index_text.size()) {
        std::size_t eol = index_text.find('\n', pos);
        if (eol == std::string::npos) eol = index_text.size();
        const std::string line = index_text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        IndexRecord r = parse_line(line, lineno);

        const bool is_meta = r.key[0] == '%';
        if (is_meta) {
            if (r.dtype != "str") {
                throw UnsupportedDtypeError("metadata record '" + r.key + "' has dtype '" + r.dtype +
                                            "', expected str");
            }
        } else if (r.dtype != "f32") {
            throw UnsupportedDtypeError("tensor '" + r.key + "' has unsupported dtype '" + r.dtype +
                                        "' (only f32 is readable)");
        }

        if (r.offset + r.nbytes > payload_size) {
            throw CorruptionError("payload truncated: record '" + r.key + "' needs bytes [" +
                                  std::to_string(r.offset) + "," +
                                  std::to_string(r.offset + r.nbytes) + ") but payload has " +
                                  std::to_string(payload_size));
        }
        in.seekg(static_cast<std::streamoff>(payload_base + r.offset));

        if (is_meta) {
            std::string value(r.nbytes, '\0');
            if (r.nbytes && !in.read(value.data(), static_cast<std::streamsize>(r.nbytes))) {
                throw CorruptionError("short read of metadata '" + r.key + "'");
            }
            const std::string mkey = r.key.substr(1);
            if (a.meta(mkey)) throw FormatError("duplicate metadata key '" + mkey + "'");
            a.set_meta(mkey, value);
        } else {
            const std::int64_t numel = shape_numel(r.dims);
            if (r.nbytes != static_cast<std::uint64_t>(numel) * 4) {
                throw FormatError("record '" + r.key + "': nbytes " + std::to_string(r.nbytes) +
                                  " does not match shape (" + std::to_string(numel * 4) +
                                  " expected)");
            }
            if (a.has(r.key)) throw FormatError("duplicate key '" + r.key + "' in index");
            Tensor t(r.dims);
            if (numel && !in.read(reinterpret_cast<char*>(t.data.data()),
                                  static_cast<std::streamsize>(r.nbytes))) {
                throw CorruptionError("short read of tensor '" + r.key + "'");
            }
            a.put(r.key, std::move(t));
        }
    }
    return a;
}

std::uint64_t tensor_checksum(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data.data());
    const std::size_t n = t.data.size() * 4;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace vitreforge
