#ifndef ACCSTEER_ACTIVATION_STORE_HPP
#define ACCSTEER_ACTIVATION_STORE_HPP

// On-disk layout of a dataset directory:
//
//   manifest.jsonl              header line, then one UtteranceMeta per line
//   activations/<id>.actv       encoder layers 0..L-1 of one utterance
//   activations/<id>.proj.actv  optional projector output (single layer, width P)
//
// Activation file (all integers u32 little-endian, floats f32 little-endian):
//
//   "ACTV" | version=1 | L | D | T_0 .. T_{L-1} | payload_0 .. payload_{L-1}
//
// payload_l holds T_l * D floats, time-major (row t is contiguous).

#include "accsteer/error.hpp"
#include "accsteer/matrix.hpp"
#include "accsteer/random.hpp"
#include "accsteer/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace accsteer {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::array<char, 4> kActivationMagic{'A', 'C', 'T', 'V'};
inline constexpr std::uint32_t kActivationVersion = 1;
inline constexpr int kManifestFormatVersion = 1;
inline constexpr const char* kManifestFileName = "manifest.jsonl";

struct UtteranceMeta {
    std::string utterance_id;
    std::string speaker_id;
    std::string accent_group;
    std::string transcript;
    std::optional<std::uint32_t> duration_frames;

    friend bool operator==(const UtteranceMeta&, const UtteranceMeta&) = default;
};

/// Hidden states of one utterance: layers[l] is T_l x D.
struct ActivationRecord {
    std::string utterance_id;
    std::vector<Matrix> layers;

    std::size_t layer_count() const noexcept { return layers.size(); }
    std::size_t hidden_dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }
};

struct PooledRep {
    std::string utterance_id;
    std::size_t layer = 0;
    std::vector<float> vector;
};

// ---------------------------------------------------------------------------
// Little-endian primitives

namespace detail {

inline void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::byte* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline void put_f32(std::vector<std::byte>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(const std::byte* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::vector<std::byte> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in)
        throw DataError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<std::byte> bytes(size);
    in.seekg(0);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        throw DataError("read failed: " + path.string());
    return bytes;
}

/// Write to a sibling temp file, then rename over the target.
inline void write_atomically(const fs::path& path, std::span<const std::byte> bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot open for writing: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Utterance ids become file names; anything outside [A-Za-z0-9_.-] is %-escaped.
inline std::string file_stem_for(std::string_view id) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : id) {
        const bool safe = std::isalnum(c) || c == '_' || c == '-' || (c == '.' && !out.empty());
        if (safe) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xf]);
        }
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Record validation and binary I/O

/// Throws unless the record has contiguous layers of a shared width, at
/// least one time step each, and only finite values.
inline void validate_record(const ActivationRecord& record) {
    if (record.layers.empty())
        throw ShapeMismatchError("record '" + record.utterance_id + "' has no layers");
    const std::size_t dim = record.hidden_dim();
    if (dim == 0)
        throw ShapeMismatchError("record '" + record.utterance_id + "' has hidden_dim 0");
    for (std::size_t l = 0; l < record.layers.size(); ++l) {
        const Matrix& m = record.layers[l];
        if (m.cols() != dim)
            throw ShapeMismatchError("record '" + record.utterance_id + "' layer " + std::to_string(l) + " has width " +
                                     std::to_string(m.cols()) + ", expected " + std::to_string(dim));
        if (m.rows() == 0)
            throw ShapeMismatchError("record '" + record.utterance_id + "' layer " + std::to_string(l) + " has no time steps");
        const auto flat = m.flat();
        for (std::size_t i = 0; i < flat.size(); ++i) {
            if (!std::isfinite(flat[i]))
                throw NonFiniteError("record '" + record.utterance_id + "' layer " + std::to_string(l) + " flat index " +
                                         std::to_string(i) + " is not finite",
                                     l, i);
        }
    }
}

inline std::vector<std::byte> encode_activation_file(const ActivationRecord& record) {
    validate_record(record);
    const auto layer_count = static_cast<std::uint32_t>(record.layer_count());
    const auto dim = static_cast<std::uint32_t>(record.hidden_dim());

    std::size_t payload = 0;
    for (const auto& m : record.layers)
        payload += m.size();

    std::vector<std::byte> out;
    out.reserve(16 + 4 * layer_count + 4 * payload);
    for (char c : kActivationMagic)
        out.push_back(static_cast<std::byte>(c));
    detail::put_u32(out, kActivationVersion);
    detail::put_u32(out, layer_count);
    detail::put_u32(out, dim);
    for (const auto& m : record.layers)
        detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    for (const auto& m : record.layers)
        for (float f : m.flat())
            detail::put_f32(out, f);
    return out;
}

inline ActivationRecord decode_activation_file(std::span<const std::byte> bytes, std::string utterance_id = {}) {
    constexpr std::uint64_t fixed_header = 16;
    if (bytes.size() < 4)
        throw TruncatedError("activation file shorter than its magic: expected at least 4 bytes, got " +
                                 std::to_string(bytes.size()),
                             4, bytes.size());
    if (std::memcmp(bytes.data(), kActivationMagic.data(), 4) != 0)
        throw BadMagicError("activation file does not start with \"ACTV\"");
    if (bytes.size() < fixed_header)
        throw TruncatedError("activation header truncated: expected at least 16 bytes, got " + std::to_string(bytes.size()),
                             fixed_header, bytes.size());

    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kActivationVersion)
        throw UnsupportedVersionError("unsupported activation file version " + std::to_string(version), version);
    const std::uint32_t layer_count = detail::get_u32(bytes.data() + 8);
    const std::uint32_t dim = detail::get_u32(bytes.data() + 12);
    if (layer_count == 0 || dim == 0)
        throw ShapeMismatchError("activation file declares L=" + std::to_string(layer_count) + ", D=" + std::to_string(dim));

    const std::uint64_t header_bytes = fixed_header + 4ull * layer_count;
    if (bytes.size() < header_bytes)
        throw TruncatedError("activation header truncated: expected " + std::to_string(header_bytes) + " bytes, got " +
                                 std::to_string(bytes.size()),
                             header_bytes, bytes.size());

    std::vector<std::uint32_t> lengths(layer_count);
    std::uint64_t floats = 0;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        lengths[l] = detail::get_u32(bytes.data() + fixed_header + 4ull * l);
        if (lengths[l] == 0)
            throw ShapeMismatchError("activation file layer " + std::to_string(l) + " declares zero time steps");
        floats += static_cast<std::uint64_t>(lengths[l]) * dim;
    }
    const std::uint64_t expected = header_bytes + 4 * floats;
    if (bytes.size() < expected)
        throw TruncatedError("activation payload truncated: expected " + std::to_string(expected) + " bytes, got " +
                                 std::to_string(bytes.size()),
                             expected, bytes.size());
    if (bytes.size() > expected)
        throw ShapeMismatchError("activation file has " + std::to_string(bytes.size() - expected) +
                                 " bytes beyond the declared shape (expected " + std::to_string(expected) + ")");

    ActivationRecord record;
    record.utterance_id = std::move(utterance_id);
    record.layers.reserve(layer_count);
    const std::byte* p = bytes.data() + header_bytes;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        std::vector<float> data(static_cast<std::size_t>(lengths[l]) * dim);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(data.data(), p, data.size() * sizeof(float));
            p += data.size() * sizeof(float);
        } else {
            for (auto& f : data) {
                f = detail::get_f32(p);
                p += 4;
            }
        }
        record.layers.emplace_back(lengths[l], dim, std::move(data));
    }
    validate_record(record);
    return record;
}

inline void write_activation_file(const fs::path& path, const ActivationRecord& record) {
    const auto bytes = encode_activation_file(record);
    detail::write_atomically(path, bytes);
}

inline ActivationRecord read_activation_file(const fs::path& path, std::string utterance_id = {}) {
    const auto bytes = detail::slurp(path);
    return decode_activation_file(bytes, std::move(utterance_id));
}

// ---------------------------------------------------------------------------
// Pooling

/// Time-mean of a layer matrix, accumulated in double.
inline std::vector<double> time_mean(const Matrix& m) {
    std::vector<double> acc(m.cols(), 0.0);
    for (std::size_t t = 0; t < m.rows(); ++t) {
        const auto row = m.row(t);
        for (std::size_t d = 0; d < m.cols(); ++d)
            acc[d] += row[d];
    }
    const double inv = m.rows() ? 1.0 / static_cast<double>(m.rows()) : 0.0;
    for (auto& v : acc)
        v *= inv;
    return acc;
}

inline PooledRep mean_pool(const ActivationRecord& record, std::size_t layer) {
    if (layer >= record.layer_count())
        throw ValidationError("layer " + std::to_string(layer) + " out of range for record '" + record.utterance_id +
                              "' with " + std::to_string(record.layer_count()) + " layers");
    const auto mean = time_mean(record.layers[layer]);
    PooledRep rep{record.utterance_id, layer, std::vector<float>(mean.size())};
    std::transform(mean.begin(), mean.end(), rep.vector.begin(), [](double v) { return static_cast<float>(v); });
    return rep;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
    UtteranceMeta meta;
    std::string file;           // relative to the dataset root
    std::string projector_file; // relative; empty when absent
};

struct DatasetManifest {
    int format_version = kManifestFormatVersion;
    std::vector<std::string> groups;
    std::string standard_group;
    /// Free-form header fields (layer_count, hidden_dim, projector_dim, ...).
    json extras = json::object();
    std::vector<ManifestEntry> records;

    const ManifestEntry* find(std::string_view id) const {
        if (index_.size() != records.size())
            rebuild_index();
        auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &records[it->second];
    }

    const ManifestEntry& at(std::string_view id) const {
        const auto* e = find(id);
        if (!e)
            throw DataError("unknown utterance '" + std::string(id) + "'");
        return *e;
    }

    bool has_group(std::string_view g) const { return std::find(groups.begin(), groups.end(), g) != groups.end(); }

    /// Entries of one group, in manifest order.
    std::vector<const ManifestEntry*> in_group(std::string_view group) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : records)
            if (e.meta.accent_group == group)
                out.push_back(&e);
        return out;
    }

    /// Sorted, de-duplicated speakers of one group.
    std::vector<std::string> speakers(std::string_view group) const {
        std::set<std::string> s;
        for (const auto& e : records)
            if (e.meta.accent_group == group)
                s.insert(e.meta.speaker_id);
        return {s.begin(), s.end()};
    }

    std::vector<std::string> accent_groups() const {
        std::vector<std::string> out;
        for (const auto& g : groups)
            if (g != standard_group)
                out.push_back(g);
        return out;
    }

    std::map<std::string, std::string> activation_file_index() const {
        std::map<std::string, std::string> out;
        for (const auto& e : records)
            out.emplace(e.meta.utterance_id, e.file);
        return out;
    }

    void rebuild_index() const {
        index_.clear();
        for (std::size_t i = 0; i < records.size(); ++i)
            index_.emplace(records[i].meta.utterance_id, i);
    }

private:
    mutable std::unordered_map<std::string, std::size_t> index_;
};

inline json header_to_json(const DatasetManifest& m) {
    json j = m.extras;
    j["format_version"] = m.format_version;
    j["groups"] = m.groups;
    j["standard_group"] = m.standard_group;
    return j;
}

inline json entry_to_json(const ManifestEntry& e) {
    json j{{"utterance_id", e.meta.utterance_id},
           {"speaker_id", e.meta.speaker_id},
           {"accent_group", e.meta.accent_group},
           {"transcript", e.meta.transcript},
           {"file", e.file}};
    if (e.meta.duration_frames)
        j["duration_frames"] = *e.meta.duration_frames;
    if (!e.projector_file.empty())
        j["projector_file"] = e.projector_file;
    return j;
}

inline ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.meta.utterance_id = j.at("utterance_id").get<std::string>();
    e.meta.speaker_id = j.at("speaker_id").get<std::string>();
    e.meta.accent_group = j.at("accent_group").get<std::string>();
    e.meta.transcript = j.at("transcript").get<std::string>();
    if (j.contains("duration_frames"))
        e.meta.duration_frames = j.at("duration_frames").get<std::uint32_t>();
    e.file = j.at("file").get<std::string>();
    e.projector_file = j.value("projector_file", std::string{});
    return e;
}

/// Checks header/record consistency: one standard group, unique ids,
/// declared groups, non-empty normalized transcripts.
inline void validate_manifest(const DatasetManifest& m) {
    if (m.format_version != kManifestFormatVersion)
        throw FormatError("unsupported manifest format_version " + std::to_string(m.format_version));
    if (m.standard_group.empty() || !m.has_group(m.standard_group))
        throw FormatError("manifest must flag exactly one declared group as standard_group");
    std::set<std::string> seen_groups;
    for (const auto& g : m.groups)
        if (!seen_groups.insert(g).second)
            throw FormatError("group '" + g + "' declared twice");
    std::set<std::string> ids;
    for (const auto& e : m.records) {
        if (!ids.insert(e.meta.utterance_id).second)
            throw FormatError("duplicate utterance_id '" + e.meta.utterance_id + "'");
        if (!m.has_group(e.meta.accent_group))
            throw FormatError("utterance '" + e.meta.utterance_id + "' uses undeclared group '" + e.meta.accent_group + "'");
        if (normalize_transcript(e.meta.transcript).empty())
            throw FormatError("utterance '" + e.meta.utterance_id + "' has an empty transcript");
        if (e.file.empty())
            throw FormatError("utterance '" + e.meta.utterance_id + "' has no activation file");
    }
}

inline DatasetManifest read_manifest(const fs::path& root) {
    const fs::path path = root / kManifestFileName;
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open manifest " + path.string());
    DatasetManifest m;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        try {
            if (!have_header) {
                if (!j.contains("format_version"))
                    throw FormatError(path.string() + ": first line must be the header");
                m.format_version = j.at("format_version").get<int>();
                m.groups = j.at("groups").get<std::vector<std::string>>();
                m.standard_group = j.at("standard_group").get<std::string>();
                j.erase("format_version");
                j.erase("groups");
                j.erase("standard_group");
                m.extras = std::move(j);
                have_header = true;
            } else {
                m.records.push_back(entry_from_json(j));
            }
        } catch (const json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (!have_header)
        throw FormatError(path.string() + ": empty manifest");
    validate_manifest(m);
    m.rebuild_index();
    return m;
}

/// Every manifest record has its activation file on disk, and every
/// activation file on disk belongs to a manifest record.
inline void check_referential_integrity(const DatasetManifest& m, const fs::path& root) {
    std::set<fs::path> referenced;
    for (const auto& e : m.records) {
        for (const auto* rel : {&e.file, &e.projector_file}) {
            if (rel->empty())
                continue;
            const fs::path p = fs::weakly_canonical(root / *rel);
            if (!fs::is_regular_file(p))
                throw DataError("missing activation file for '" + e.meta.utterance_id + "': " + *rel);
            if (!referenced.insert(p).second)
                throw DataError("activation file referenced twice: " + *rel);
        }
    }
    const fs::path dir = root / "activations";
    if (!fs::exists(dir))
        return;
    for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().extension() != ".actv")
            continue;
        if (!referenced.contains(fs::weakly_canonical(f.path())))
            throw DataError("orphan activation file not in manifest: " + f.path().string());
    }
}

/// FNV-1a over the manifest and every referenced file, in manifest order.
inline std::uint64_t dataset_hash(const DatasetManifest& m, const fs::path& root) {
    Fnv1a h;
    for (const auto& e : m.records) {
        h.update(entry_to_json(e).dump());
        for (const auto* rel : {&e.file, &e.projector_file}) {
            if (rel->empty())
                continue;
            const auto bytes = detail::slurp(root / *rel);
            h.update(bytes);
        }
    }
    h.update(header_to_json(m).dump());
    return h.digest();
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Writing datasets

/// Appends records to a dataset directory. Not thread-safe: callers
/// serialize writes to one manifest.
class DatasetWriter {
public:
    /// Starts a new dataset; `root` must be absent or empty.
    static DatasetWriter create(const fs::path& root, std::vector<std::string> groups, std::string standard_group,
                                json extras = json::object()) {
        if (fs::exists(root) && !fs::is_empty(root))
            throw ValidationError("output directory is not empty: " + root.string());
        DatasetManifest m;
        m.groups = std::move(groups);
        m.standard_group = std::move(standard_group);
        m.extras = std::move(extras);
        validate_manifest(m);
        fs::create_directories(root / "activations");
        DatasetWriter w(root, std::move(m));
        std::ofstream out(root / kManifestFileName, std::ios::trunc);
        out << header_to_json(w.manifest_).dump() << '\n';
        if (!out)
            throw DataError("cannot write manifest in " + root.string());
        return w;
    }

    static DatasetWriter open(const fs::path& root) {
        auto m = read_manifest(root);
        fs::create_directories(root / "activations");
        return DatasetWriter(root, std::move(m));
    }

    /// Validates, writes the activation file (and projector output when
    /// given), then appends the manifest line. Returns the activation path.
    fs::path write(ActivationRecord record, UtteranceMeta meta, const Matrix* projector = nullptr) {
        if (record.utterance_id.empty())
            record.utterance_id = meta.utterance_id;
        if (meta.utterance_id.empty() || record.utterance_id != meta.utterance_id)
            throw ValidationError("record id '" + record.utterance_id + "' does not match metadata id '" +
                                  meta.utterance_id + "'");
        validate_record(record);
        meta.transcript = normalize_transcript(meta.transcript);
        if (meta.transcript.empty())
            throw ValidationError("utterance '" + meta.utterance_id + "' has an empty transcript after normalization");
        if (!manifest_.has_group(meta.accent_group))
            throw ValidationError("utterance '" + meta.utterance_id + "' uses undeclared group '" + meta.accent_group + "'");
        if (manifest_.find(meta.utterance_id))
            throw ValidationError("duplicate utterance_id '" + meta.utterance_id + "'");

        ManifestEntry entry;
        const std::string stem = detail::file_stem_for(meta.utterance_id);
        entry.file = "activations/" + stem + ".actv";
        write_activation_file(root_ / entry.file, record);
        if (projector) {
            entry.projector_file = "activations/" + stem + ".proj.actv";
            ActivationRecord proj{meta.utterance_id, {*projector}};
            write_activation_file(root_ / entry.projector_file, proj);
        }
        entry.meta = std::move(meta);

        std::ofstream out(root_ / kManifestFileName, std::ios::app);
        out << entry_to_json(entry).dump() << '\n';
        if (!out)
            throw DataError("cannot append to manifest in " + root_.string());
        manifest_.records.push_back(std::move(entry));
        manifest_.rebuild_index();
        return root_ / manifest_.records.back().file;
    }

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    const fs::path& root() const noexcept { return root_; }

private:
    DatasetWriter(fs::path root, DatasetManifest m) : root_(std::move(root)), manifest_(std::move(m)) {}

    fs::path root_;
    DatasetManifest manifest_;
};

/// Appends one record to the existing dataset at `root`.
inline fs::path write_record(const ActivationRecord& record, const UtteranceMeta& meta, const fs::path& root) {
    auto writer = DatasetWriter::open(root);
    return writer.write(record, meta);
}

inline ActivationRecord read_record(const fs::path& path) {
    return read_activation_file(path, path.stem().string());
}

// ---------------------------------------------------------------------------
// Reading datasets

/// Read-side view of a dataset with a load-on-demand record cache. Safe for
/// concurrent readers.
class ActivationStore {
public:
    explicit ActivationStore(fs::path root) : root_(std::move(root)), manifest_(read_manifest(root_)) {}

    const fs::path& root() const noexcept { return root_; }
    const DatasetManifest& manifest() const noexcept { return manifest_; }
    const UtteranceMeta& meta(std::string_view id) const { return manifest_.at(id).meta; }

    std::shared_ptr<const ActivationRecord> record(const std::string& id) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = records_.find(id); it != records_.end())
                return it->second;
        }
        const auto& entry = manifest_.at(id);
        auto rec = std::make_shared<const ActivationRecord>(read_activation_file(root_ / entry.file, id));
        std::lock_guard lock(mutex_);
        return records_.try_emplace(id, std::move(rec)).first->second;
    }

    /// Stored projector output, or nullptr when the dataset has none.
    std::shared_ptr<const Matrix> projector(const std::string& id) const {
        const auto& entry = manifest_.at(id);
        if (entry.projector_file.empty())
            return nullptr;
        {
            std::lock_guard lock(mutex_);
            if (auto it = projectors_.find(id); it != projectors_.end())
                return it->second;
        }
        auto rec = read_activation_file(root_ / entry.projector_file, id);
        if (rec.layer_count() != 1)
            throw ShapeMismatchError("projector file for '" + id + "' must hold exactly one layer");
        auto m = std::make_shared<const Matrix>(std::move(rec.layers.front()));
        std::lock_guard lock(mutex_);
        return projectors_.try_emplace(id, std::move(m)).first->second;
    }

    PooledRep pooled(const std::string& id, std::size_t layer) const { return mean_pool(*record(id), layer); }

    std::size_t layer_count() const {
        if (manifest_.extras.contains("layer_count"))
            return manifest_.extras.at("layer_count").get<std::size_t>();
        if (manifest_.records.empty())
            throw DataError("empty dataset");
        return record(manifest_.records.front().meta.utterance_id)->layer_count();
    }

private:
    fs::path root_;
    DatasetManifest manifest_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::shared_ptr<const ActivationRecord>> records_;
    mutable std::unordered_map<std::string, std::shared_ptr<const Matrix>> projectors_;
};

} // namespace accsteer

#endif // ACCSTEER_ACTIVATION_STORE_HPP
