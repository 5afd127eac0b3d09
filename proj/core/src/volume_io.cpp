#include "mdsnet/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "mdsnet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "volume blobs are little-endian; big-endian hosts are not supported");

namespace mdsnet {

namespace {

constexpr const char* kMagic = "mdsnet-volume 1";

std::filesystem::path raw_path_for(const std::filesystem::path& header_path,
                                   const std::string& data_name) {
    return header_path.parent_path() / data_name;
}

}  // namespace

std::string to_string(VolumeDtype dtype) { return dtype == VolumeDtype::u8 ? "u8" : "f32"; }

VolumeDtype volume_dtype_from_string(const std::string& s) {
    if (s == "u8") return VolumeDtype::u8;
    if (s == "f32") return VolumeDtype::f32;
    fail("unknown volume dtype: ", s);
}

VolumeDtype default_dtype(VolumeKind kind) {
    return kind == VolumeKind::label ? VolumeDtype::u8 : VolumeDtype::f32;
}

void save_volume(const std::filesystem::path& header_path, const Volume& volume) {
    save_volume(header_path, volume, default_dtype(volume.kind));
}

void save_volume(const std::filesystem::path& header_path, const Volume& volume,
                 VolumeDtype dtype) {
    volume.validate();
    require(dtype != VolumeDtype::u8 || volume.kind == VolumeKind::label,
            "u8 volume files are reserved for label volumes, kind is ", to_string(volume.kind));

    std::filesystem::path raw = header_path;
    raw.replace_extension(".raw");

    std::ofstream hf(header_path);
    require(hf.good(), "cannot write volume header ", header_path.string());
    hf << kMagic << "\n";
    hf << "dims: " << volume.d << " " << volume.l << " " << volume.w << "\n";
    hf << "dtype: " << to_string(dtype) << "\n";
    hf << "order: d,l,w\n";
    hf << "kind: " << to_string(volume.kind) << "\n";
    if (volume.has_spacing) {
        hf << "spacing: " << volume.spacing[0] << " " << volume.spacing[1] << " "
           << volume.spacing[2] << "\n";
    }
    hf << "data: " << raw.filename().string() << "\n";
    hf.close();
    require(hf.good(), "failed writing volume header ", header_path.string());

    std::ofstream bf(raw, std::ios::binary);
    require(bf.good(), "cannot write volume blob ", raw.string());
    if (dtype == VolumeDtype::u8) {
        std::vector<unsigned char> bytes(volume.size());
        for (std::size_t i = 0; i < volume.size(); ++i) {
            bytes[i] = static_cast<unsigned char>(volume.voxels[i] != 0.0 ? 1 : 0);
        }
        bf.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    } else {
        std::vector<float> floats(volume.size());
        for (std::size_t i = 0; i < volume.size(); ++i) {
            floats[i] = static_cast<float>(volume.voxels[i]);
        }
        bf.write(reinterpret_cast<const char*>(floats.data()),
                 static_cast<std::streamsize>(floats.size() * sizeof(float)));
    }
    bf.close();
    require(bf.good(), "failed writing volume blob ", raw.string());
}

Volume load_volume(const std::filesystem::path& header_path) {
    std::ifstream hf(header_path);
    require(hf.good(), "cannot open volume header ", header_path.string());
    std::string line;
    std::getline(hf, line);
    require(line == kMagic, header_path.string(), ": not a volume header (bad magic)");

    std::size_t d = 0, l = 0, w = 0;
    VolumeDtype dtype = VolumeDtype::f32;
    VolumeKind kind = VolumeKind::image;
    bool has_spacing = false;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::string data_name;
    bool saw_dims = false, saw_data = false;

    while (std::getline(hf, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "dims:") {
            ls >> d >> l >> w;
            require(!ls.fail() && d > 0 && l > 0 && w > 0, header_path.string(),
                    ": malformed dims line");
            saw_dims = true;
        } else if (tag == "dtype:") {
            std::string s;
            ls >> s;
            dtype = volume_dtype_from_string(s);
        } else if (tag == "order:") {
            std::string s;
            ls >> s;
            require(s == "d,l,w", header_path.string(), ": unsupported axis order ", s);
        } else if (tag == "kind:") {
            std::string s;
            ls >> s;
            kind = volume_kind_from_string(s);
        } else if (tag == "spacing:") {
            ls >> spacing[0] >> spacing[1] >> spacing[2];
            require(!ls.fail(), header_path.string(), ": malformed spacing line");
            has_spacing = true;
        } else if (tag == "data:") {
            ls >> data_name;
            saw_data = true;
        } else {
            fail(header_path.string(), ": unknown header tag ", tag);
        }
    }
    require(saw_dims, header_path.string(), ": header missing dims");
    require(saw_data, header_path.string(), ": header missing data entry");

    const std::filesystem::path raw = raw_path_for(header_path, data_name);
    std::ifstream bf(raw, std::ios::binary);
    require(bf.good(), "cannot open volume blob ", raw.string());

    Volume volume(d, l, w, kind);
    volume.has_spacing = has_spacing;
    volume.spacing = spacing;
    const std::size_t n = volume.size();
    if (dtype == VolumeDtype::u8) {
        std::vector<unsigned char> bytes(n);
        bf.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
        require(bf.gcount() == static_cast<std::streamsize>(n), raw.string(),
                ": blob shorter than dims imply");
        for (std::size_t i = 0; i < n; ++i) volume.voxels[i] = static_cast<double>(bytes[i]);
    } else {
        std::vector<float> floats(n);
        bf.read(reinterpret_cast<char*>(floats.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        require(bf.gcount() == static_cast<std::streamsize>(n * sizeof(float)), raw.string(),
                ": blob shorter than dims imply");
        for (std::size_t i = 0; i < n; ++i) volume.voxels[i] = static_cast<double>(floats[i]);
    }
    volume.validate();
    return volume;
}

}  // namespace mdsnet
