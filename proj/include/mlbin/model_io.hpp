#pragma once

// On-disk models. A model is a directory holding `manifest.json` (format,
// version, dimensions, tensor directory) and `tensors.bin` (raw
// little-endian payloads at the listed offsets).
//
//   float model:     every tensor dtype "f32", row-major
//   quantized model: weights and biases dtype "bitplanes" (levels x
//                    serialized BitPlane, level order) plus a "scaling"
//                    object; the classifier head stays "f32"
//
// Unknown manifest fields are accepted and reported as warnings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/bytes.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/lstm.hpp"

namespace mlbin {

inline constexpr int model_format_version = 1;
inline constexpr const char* model_format = "mlbin.model";
inline constexpr const char* qmodel_format = "mlbin.qmodel";
inline constexpr const char* manifest_name = "manifest.json";
inline constexpr const char* blob_name = "tensors.bin";

/// In-memory image of a model directory.
struct ModelFiles {
    std::string manifest;
    std::vector<std::uint8_t> blob;

    friend bool operator==(const ModelFiles&, const ModelFiles&) = default;
};

struct Model {
    LstmParams params;
    ClassifierHead head;
    std::vector<std::string> warnings;
};

struct QModel {
    QuantizedLstmParams params;
    ClassifierHead head;
    std::vector<std::string> warnings;
};

namespace detail {

using json = nlohmann::json;

inline std::string tensor_name(const char* kind, Gate g) { return std::string(kind) + "." + gate_name(g); }

inline void append_f32(std::vector<std::uint8_t>& blob, json& entries, const std::string& name, const DenseTensor& t) {
    entries.push_back(
        {{"name", name}, {"dtype", "f32"}, {"shape", t.shape()}, {"offset", blob.size()}, {"bytes", t.size() * 4}});
    for (float v : t.values()) bytes::put_le<float>(blob, v);
}

inline void append_planes(std::vector<std::uint8_t>& blob, json& entries, const std::string& name,
                          const MultiLevelTensor& t) {
    const auto offset = blob.size();
    for (const auto& p : t.planes()) p.serialize(blob);
    entries.push_back({{"name", name},
                       {"dtype", "bitplanes"},
                       {"shape", t.shape()},
                       {"levels", t.levels()},
                       {"alpha_exp", t.alpha_exp()},
                       {"offset", offset},
                       {"bytes", blob.size() - offset}});
}

inline json scaling_json(const ScalingConfig& cfg) {
    json j = json::object();
    for (auto g : all_groups) j[group_name(g)] = {{"levels", cfg[g].levels}, {"alpha_exp", cfg[g].alpha_exp}};
    return j;
}

inline std::string dump_manifest(const json& j) { return j.dump(2) + "\n"; }

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorKind::structural, where + ": missing field '" + key + "'");
    try {
        return it->template get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::structural, where + ": field '" + key + "' has the wrong type");
    }
}

inline void warn_unknown(const json& obj, const std::set<std::string>& known, const std::string& where,
                         std::vector<std::string>& warnings) {
    for (const auto& [k, v] : obj.items())
        if (!known.contains(k)) warnings.push_back(where + ": ignoring unknown field '" + k + "'");
}

/// Parsed manifest plus the validated byte range of each tensor.
class ManifestReader {
public:
    ManifestReader(const ModelFiles& files, const char* format) : blob_(files.blob) {
        try {
            root_ = json::parse(files.manifest);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::structural, std::string("manifest is not valid JSON: ") + e.what());
        }
        require(root_.is_object(), ErrorKind::structural, "manifest must be a JSON object");
        const auto fmt = field<std::string>(root_, "format", "manifest");
        if (fmt != format) fail(ErrorKind::magic, "manifest format '" + fmt + "', expected '" + format + "'");
        const auto version = field<int>(root_, "version", "manifest");
        if (version != model_format_version)
            fail(ErrorKind::version, "model format version " + std::to_string(version) + " unsupported (expected " +
                                         std::to_string(model_format_version) + ")");
        n_input = field<std::size_t>(root_, "n_input", "manifest");
        n_hidden = field<std::size_t>(root_, "n_hidden", "manifest");
        n_classes = field<std::size_t>(root_, "n_classes", "manifest");
        require(n_input > 0 && n_hidden > 0 && n_classes > 0, ErrorKind::structural,
                "manifest dimensions must be positive");

        require(root_.contains("tensors"), ErrorKind::structural, "manifest: missing field 'tensors'");
        const auto& tensors = root_["tensors"];
        require(tensors.is_array(), ErrorKind::structural, "manifest 'tensors' must be an array");
        for (const auto& t : tensors) {
            require(t.is_object(), ErrorKind::structural, "tensor entry must be an object");
            const auto name = field<std::string>(t, "name", "tensor entry");
            const auto where = "tensor '" + name + "'";
            warn_unknown(t, {"name", "dtype", "shape", "offset", "bytes", "levels", "alpha_exp"}, where, warnings);
            const auto offset = field<std::size_t>(t, "offset", where);
            const auto size = field<std::size_t>(t, "bytes", where);
            if (!(offset <= blob_.size() && size <= blob_.size() - offset))
                fail(ErrorKind::truncated, where + " extends past the end of " + blob_name);
            if (!entries_.emplace(name, t).second) fail(ErrorKind::structural, "duplicate " + where);
            ranges_.emplace_back(offset, offset + size);
        }
    }

    /// Layout checks that need every tensor read first, so per-tensor size
    /// errors name their tensor.
    void finish() {
        std::sort(ranges_.begin(), ranges_.end());
        std::size_t extent = 0;
        for (std::size_t i = 0; i < ranges_.size(); ++i) {
            if (i > 0)
                require(ranges_[i].first >= ranges_[i - 1].second, ErrorKind::structural, "tensor byte ranges overlap");
            extent = std::max(extent, ranges_[i].second);
        }
        if (extent != blob_.size())
            fail(ErrorKind::size_mismatch, std::string(blob_name) + " holds " + std::to_string(blob_.size()) +
                                               " bytes, manifest covers " + std::to_string(extent));
    }

    const json& root() const { return root_; }

    void warn_unknown_top(const std::set<std::string>& known) { warn_unknown(root_, known, "manifest", warnings); }

    void warn_unused(const std::set<std::string>& used) {
        for (const auto& [name, t] : entries_)
            if (!used.contains(name)) warnings.push_back("ignoring unknown tensor '" + name + "'");
    }

    DenseTensor f32(const std::string& name, const Shape& shape) {
        const auto& t = entry(name, "f32", shape);
        const auto size = field<std::size_t>(t, "bytes", name);
        if (size != shape_size(shape) * 4)
            fail(ErrorKind::size_mismatch, "tensor '" + name + "' declares " + std::to_string(size) + " bytes, shape " +
                                               shape_str(shape) + " needs " + std::to_string(shape_size(shape) * 4));
        bytes::Reader in(payload(t), "tensor '" + name + "'");
        std::vector<float> v(shape_size(shape));
        for (auto& x : v) x = in.get_le<float>();
        return DenseTensor(shape, std::move(v));
    }

    MultiLevelTensor planes(const std::string& name, const Shape& shape) {
        const auto& t = entry(name, "bitplanes", shape);
        const auto levels = field<int>(t, "levels", name);
        const auto alpha_exp = field<int>(t, "alpha_exp", name);
        bytes::Reader in(payload(t), "tensor '" + name + "'");
        std::vector<BitPlane> planes;
        while (in.remaining() > 0) planes.push_back(BitPlane::deserialize(in));
        if (static_cast<int>(planes.size()) != levels)
            fail(ErrorKind::structural, "tensor '" + name + "' holds " + std::to_string(planes.size()) +
                                            " planes, manifest declares " + std::to_string(levels) + " levels");
        try {
            return MultiLevelTensor(shape, alpha_exp, std::move(planes));
        } catch (const Error& e) {
            fail(ErrorKind::structural, "tensor '" + name + "': " + e.what());
        }
    }

    std::size_t n_input = 0, n_hidden = 0, n_classes = 0;
    std::vector<std::string> warnings;

private:
    const json& entry(const std::string& name, const char* dtype, const Shape& shape) {
        const auto it = entries_.find(name);
        if (it == entries_.end()) fail(ErrorKind::structural, "manifest lacks tensor '" + name + "'");
        const auto dt = field<std::string>(it->second, "dtype", name);
        if (dt != dtype) fail(ErrorKind::structural, "tensor '" + name + "' has dtype " + dt + ", expected " + dtype);
        const auto declared = field<Shape>(it->second, "shape", name);
        if (declared != shape)
            fail(ErrorKind::size_mismatch,
                 "tensor '" + name + "' has shape " + shape_str(declared) + ", expected " + shape_str(shape));
        return it->second;
    }

    std::span<const std::uint8_t> payload(const json& t) const {
        return std::span<const std::uint8_t>(blob_).subspan(t.at("offset").get<std::size_t>(),
                                                            t.at("bytes").get<std::size_t>());
    }

    json root_;
    std::map<std::string, json> entries_;
    std::vector<std::pair<std::size_t, std::size_t>> ranges_;
    const std::vector<std::uint8_t>& blob_;
};

inline ClassifierHead read_head(ManifestReader& r) {
    ClassifierHead head{r.f32("head.weights", {r.n_classes, r.n_hidden}), r.f32("head.bias", {r.n_classes})};
    return head;
}

inline const std::set<std::string> model_top_fields{"format",    "version", "n_input", "n_hidden",
                                                    "n_classes", "blob",    "tensors"};

}  // namespace detail

inline ModelFiles encode_model(const LstmParams& p, const ClassifierHead& head) {
    p.validate();
    head.validate(p.n_hidden);
    ModelFiles files;
    detail::json tensors = detail::json::array();
    for (const char* kind : {"w_fwd", "w_rec", "bias"})
        for (auto g : all_gates) {
            const auto& set = std::string_view(kind) == "w_fwd"   ? p.w_fwd
                              : std::string_view(kind) == "w_rec" ? p.w_rec
                                                                  : p.bias;
            detail::append_f32(files.blob, tensors, detail::tensor_name(kind, g), set[index(g)]);
        }
    detail::append_f32(files.blob, tensors, "head.weights", head.weights);
    detail::append_f32(files.blob, tensors, "head.bias", head.bias);
    const detail::json root = {{"format", model_format}, {"version", model_format_version}, {"n_input", p.n_input},
                               {"n_hidden", p.n_hidden}, {"n_classes", head.n_classes()},   {"blob", blob_name},
                               {"tensors", tensors}};
    files.manifest = detail::dump_manifest(root);
    return files;
}

inline Model decode_model(const ModelFiles& files) {
    detail::ManifestReader r(files, model_format);
    r.warn_unknown_top(detail::model_top_fields);
    Model m;
    m.params.n_input = r.n_input;
    m.params.n_hidden = r.n_hidden;
    std::set<std::string> used{"head.weights", "head.bias"};
    for (auto g : all_gates) {
        const auto i = index(g);
        for (const char* kind : {"w_fwd", "w_rec", "bias"}) used.insert(detail::tensor_name(kind, g));
        m.params.w_fwd[i] = r.f32(detail::tensor_name("w_fwd", g), {r.n_hidden, r.n_input});
        m.params.w_rec[i] = r.f32(detail::tensor_name("w_rec", g), {r.n_hidden, r.n_hidden});
        m.params.bias[i] = r.f32(detail::tensor_name("bias", g), {r.n_hidden});
    }
    m.head = detail::read_head(r);
    r.finish();
    r.warn_unused(used);
    m.warnings = std::move(r.warnings);
    return m;
}

inline ModelFiles encode_qmodel(const QuantizedLstmParams& q, const ClassifierHead& head) {
    head.validate(q.n_hidden());
    ModelFiles files;
    detail::json tensors = detail::json::array();
    for (auto g : all_gates) detail::append_planes(files.blob, tensors, detail::tensor_name("w_fwd", g), q.w_fwd(g));
    for (auto g : all_gates) detail::append_planes(files.blob, tensors, detail::tensor_name("w_rec", g), q.w_rec(g));
    for (auto g : all_gates) detail::append_planes(files.blob, tensors, detail::tensor_name("bias", g), q.bias(g));
    detail::append_f32(files.blob, tensors, "head.weights", head.weights);
    detail::append_f32(files.blob, tensors, "head.bias", head.bias);
    const detail::json root = {{"format", qmodel_format},
                               {"version", model_format_version},
                               {"n_input", q.n_input()},
                               {"n_hidden", q.n_hidden()},
                               {"n_classes", head.n_classes()},
                               {"blob", blob_name},
                               {"scaling", detail::scaling_json(q.config())},
                               {"tensors", tensors}};
    files.manifest = detail::dump_manifest(root);
    return files;
}

inline QModel decode_qmodel(const ModelFiles& files) {
    detail::ManifestReader r(files, qmodel_format);
    auto known = detail::model_top_fields;
    known.insert("scaling");
    r.warn_unknown_top(known);

    ScalingConfig cfg;
    detail::require(r.root().contains("scaling") && r.root()["scaling"].is_object(), ErrorKind::structural,
                    "manifest lacks a 'scaling' object");
    const auto& scaling = r.root()["scaling"];
    for (auto g : all_groups) {
        const auto where = std::string("scaling.") + group_name(g);
        if (!scaling.contains(group_name(g))) detail::fail(ErrorKind::structural, "manifest lacks " + where);
        const auto& gj = scaling.at(group_name(g));
        cfg[g] = {detail::field<int>(gj, "levels", where), detail::field<int>(gj, "alpha_exp", where)};
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        detail::fail(ErrorKind::structural, std::string("manifest scaling: ") + e.what());
    }

    PerGate<MultiLevelTensor> wf, wr, b;
    std::set<std::string> used{"head.weights", "head.bias"};
    for (auto g : all_gates) {
        const auto i = index(g);
        for (const char* kind : {"w_fwd", "w_rec", "bias"}) used.insert(detail::tensor_name(kind, g));
        wf[i] = r.planes(detail::tensor_name("w_fwd", g), {r.n_hidden, r.n_input});
        wr[i] = r.planes(detail::tensor_name("w_rec", g), {r.n_hidden, r.n_hidden});
        b[i] = r.planes(detail::tensor_name("bias", g), {r.n_hidden});
    }
    QModel m{QuantizedLstmParams(r.n_input, r.n_hidden, cfg, std::move(wf), std::move(wr), std::move(b)),
             detail::read_head(r),
             {}};
    r.finish();
    r.warn_unused(used);
    m.warnings = std::move(r.warnings);
    return m;
}

namespace detail {

inline ModelFiles read_model_dir(const std::filesystem::path& dir) {
    const auto manifest = read_file(dir / manifest_name);
    return {std::string(manifest.begin(), manifest.end()), read_file(dir / blob_name)};
}

inline void write_model_dir(const std::filesystem::path& dir, const ModelFiles& files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
    write_file(dir / blob_name, files.blob);
    write_file(dir / manifest_name,
               std::span(reinterpret_cast<const std::uint8_t*>(files.manifest.data()), files.manifest.size()));
}

}  // namespace detail

inline void save_model(const std::filesystem::path& dir, const LstmParams& p, const ClassifierHead& head) {
    detail::write_model_dir(dir, encode_model(p, head));
}

inline Model load_model(const std::filesystem::path& dir) { return decode_model(detail::read_model_dir(dir)); }

inline void save_qmodel(const std::filesystem::path& dir, const QuantizedLstmParams& q, const ClassifierHead& head) {
    detail::write_model_dir(dir, encode_qmodel(q, head));
}

inline QModel load_qmodel(const std::filesystem::path& dir) { return decode_qmodel(detail::read_model_dir(dir)); }

/// Reads only the "format" field of a model directory's manifest.
inline std::string model_dir_format(const std::filesystem::path& dir) {
    const auto manifest = read_file(dir / manifest_name);
    try {
        const auto j = nlohmann::json::parse(manifest.begin(), manifest.end());
        return j.value("format", std::string{});
    } catch (const nlohmann::json::exception& e) {
        detail::fail(ErrorKind::structural, std::string("manifest is not valid JSON: ") + e.what());
    }
}

}  // namespace mlbin
