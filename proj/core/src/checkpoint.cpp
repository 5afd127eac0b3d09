#include "mdsnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mdsnet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are not supported");

namespace mdsnet {

namespace {

constexpr const char* kMagic = "mdsnet-checkpoint 1";

struct ManifestBuffer {
    std::string name;
    Shape shape;
    std::size_t param_offset = 0;
    bool has_momentum = false;
    std::size_t momentum_offset = 0;
};

struct Manifest {
    std::string kind;
    std::string blob_name;
    std::map<std::string, std::string> config;
    std::vector<ManifestBuffer> buffers;
};

Manifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open checkpoint manifest ", path.string());
    std::string line;
    std::getline(in, line);
    require(line == kMagic, path.string(), ": not a checkpoint manifest (bad magic)");

    Manifest m;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "kind:") {
            ls >> m.kind;
        } else if (tag == "dtype:") {
            std::string dt;
            ls >> dt;
            require(dt == "f64", path.string(), ": unsupported checkpoint dtype ", dt);
        } else if (tag == "blob:") {
            ls >> m.blob_name;
        } else if (tag == "config:") {
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                require(eq != std::string::npos, path.string(), ": malformed config entry ", kv);
                m.config[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        } else if (tag == "buffers:") {
            ls >> expected;
        } else if (tag == "buffer:") {
            ManifestBuffer b;
            std::size_t rank = 0;
            ls >> b.name >> rank;
            b.shape.resize(rank);
            for (std::size_t i = 0; i < rank; ++i) ls >> b.shape[i];
            std::string mom;
            ls >> b.param_offset >> mom;
            require(!ls.fail(), path.string(), ": malformed buffer line for ", b.name);
            if (mom != "-") {
                b.has_momentum = true;
                b.momentum_offset = std::stoull(mom);
            }
            m.buffers.push_back(std::move(b));
        } else {
            fail(path.string(), ": unknown manifest tag ", tag);
        }
    }
    require(m.buffers.size() == expected, path.string(), ": manifest lists ", expected,
            " buffers but contains ", m.buffers.size());
    require(!m.blob_name.empty(), path.string(), ": manifest missing blob entry");
    return m;
}

std::size_t buffer_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return shape.empty() ? 0 : n;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& manifest_path, const std::string& kind,
                     const std::map<std::string, std::string>& config,
                     const std::vector<CheckpointEntry>& entries) {
    const std::filesystem::path blob_path =
        manifest_path.parent_path() / (manifest_path.filename().string() + ".bin");

    std::size_t offset = 0;
    std::vector<std::size_t> param_offsets, momentum_offsets;
    for (const CheckpointEntry& e : entries) {
        require(e.value != nullptr, "checkpoint entry ", e.name, " has no value tensor");
        param_offsets.push_back(offset);
        offset += e.value->size() * sizeof(double);
    }
    for (const CheckpointEntry& e : entries) {
        if (e.momentum != nullptr) {
            require(e.momentum->shape() == e.value->shape(), "checkpoint entry ", e.name,
                    ": momentum shape mismatch");
            momentum_offsets.push_back(offset);
            offset += e.momentum->size() * sizeof(double);
        } else {
            momentum_offsets.push_back(0);
        }
    }

    std::ofstream mf(manifest_path);
    require(mf.good(), "cannot write checkpoint manifest ", manifest_path.string());
    mf << kMagic << "\n";
    mf << "kind: " << kind << "\n";
    mf << "dtype: f64\n";
    mf << "blob: " << blob_path.filename().string() << "\n";
    mf << "config:";
    for (const auto& [k, v] : config) mf << " " << k << "=" << v;
    mf << "\n";
    mf << "buffers: " << entries.size() << "\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const CheckpointEntry& e = entries[i];
        mf << "buffer: " << e.name << " " << e.value->rank();
        for (std::size_t d : e.value->shape()) mf << " " << d;
        mf << " " << param_offsets[i] << " ";
        if (e.momentum) {
            mf << momentum_offsets[i];
        } else {
            mf << "-";
        }
        mf << "\n";
    }
    mf.close();
    require(mf.good(), "failed writing checkpoint manifest ", manifest_path.string());

    std::ofstream bf(blob_path, std::ios::binary);
    require(bf.good(), "cannot write checkpoint blob ", blob_path.string());
    for (const CheckpointEntry& e : entries) {
        bf.write(reinterpret_cast<const char*>(e.value->data()),
                 static_cast<std::streamsize>(e.value->size() * sizeof(double)));
    }
    for (const CheckpointEntry& e : entries) {
        if (e.momentum) {
            bf.write(reinterpret_cast<const char*>(e.momentum->data()),
                     static_cast<std::streamsize>(e.momentum->size() * sizeof(double)));
        }
    }
    bf.close();
    require(bf.good(), "failed writing checkpoint blob ", blob_path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& manifest_path) {
    const Manifest m = parse_manifest(manifest_path);
    return {m.kind, m.config};
}

void load_checkpoint(const std::filesystem::path& manifest_path, const std::string& expected_kind,
                     const std::vector<CheckpointSlot>& slots) {
    const Manifest m = parse_manifest(manifest_path);
    require(m.kind == expected_kind, manifest_path.string(), ": checkpoint kind is ", m.kind,
            ", expected ", expected_kind);
    require(m.buffers.size() == slots.size(), manifest_path.string(), ": checkpoint holds ",
            m.buffers.size(), " buffers, model expects ", slots.size());

    const std::filesystem::path blob_path = manifest_path.parent_path() / m.blob_name;
    std::ifstream bf(blob_path, std::ios::binary);
    require(bf.good(), "cannot open checkpoint blob ", blob_path.string());

    auto read_at = [&](std::size_t offset, Tensor& dst) {
        bf.seekg(static_cast<std::streamoff>(offset));
        bf.read(reinterpret_cast<char*>(dst.data()),
                static_cast<std::streamsize>(dst.size() * sizeof(double)));
        require(bf.good(), blob_path.string(), ": truncated checkpoint blob");
    };

    for (std::size_t i = 0; i < slots.size(); ++i) {
        const ManifestBuffer& b = m.buffers[i];
        const CheckpointSlot& s = slots[i];
        require(b.name == s.name, manifest_path.string(), ": buffer ", i, " is ", b.name,
                ", model expects ", s.name);
        require(s.value != nullptr && b.shape == s.value->shape(), manifest_path.string(),
                ": buffer ", b.name, " shape ", shape_to_string(b.shape),
                " does not match model shape ", shape_to_string(s.value->shape()));
        require(buffer_size(b.shape) == s.value->size(), manifest_path.string(),
                ": buffer size mismatch for ", b.name);
        read_at(b.param_offset, *s.value);
        if (s.momentum != nullptr) {
            require(b.has_momentum, manifest_path.string(), ": buffer ", b.name,
                    " has no momentum in checkpoint");
            read_at(b.momentum_offset, *s.momentum);
        }
    }
}

}  // namespace mdsnet
