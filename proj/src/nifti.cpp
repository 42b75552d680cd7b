#include "parcelforge/nifti.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "parcelforge/error.hpp"

namespace parcelforge {
namespace {

constexpr int kHeaderSize = 348;
constexpr short kDtInt16 = 4;
constexpr short kDtFloat32 = 16;

class HeaderView {
public:
    HeaderView(const std::array<char, kHeaderSize>& bytes, bool swap) : b_(bytes), swap_(swap) {}

    template <typename V>
    V get(std::size_t offset) const {
        std::array<char, sizeof(V)> raw;
        std::memcpy(raw.data(), b_.data() + offset, sizeof(V));
        if (swap_) std::reverse(raw.begin(), raw.end());
        V v;
        std::memcpy(&v, raw.data(), sizeof(V));
        return v;
    }

private:
    const std::array<char, kHeaderSize>& b_;
    bool swap_;
};

template <typename V>
V read_sample(const char* p, bool swap) {
    std::array<char, sizeof(V)> raw;
    std::memcpy(raw.data(), p, sizeof(V));
    if (swap) std::reverse(raw.begin(), raw.end());
    V v;
    std::memcpy(&v, raw.data(), sizeof(V));
    return v;
}

}  // namespace

Volume4D load_nifti(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open NIfTI file " + path.string());
    std::array<char, kHeaderSize> hdr{};
    if (!in.read(hdr.data(), kHeaderSize)) throw FormatError("sizeof_hdr: file shorter than 348 bytes");

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, hdr.data(), 4);
    // Byte order relative to the host is detected from the fixed header size.
    bool host_swap = false;
    if (sizeof_hdr != kHeaderSize) {
        if (read_sample<std::int32_t>(hdr.data(), true) == kHeaderSize)
            host_swap = true;
        else
            throw FormatError("sizeof_hdr: expected 348, found " + std::to_string(sizeof_hdr));
    }
    HeaderView h(hdr, host_swap);

    const std::string magic(hdr.data() + 344, 4);
    const bool single_file = magic == std::string("n+1\0", 4);
    if (!single_file && magic != std::string("ni1\0", 4)) throw FormatError("magic: expected \"n+1\" or \"ni1\"");

    std::array<short, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[static_cast<std::size_t>(i)] = h.get<short>(40 + 2 * static_cast<std::size_t>(i));
    if (dim[0] < 1 || dim[0] > 7) throw FormatError("dim[0]: out of range (" + std::to_string(dim[0]) + ")");
    if (dim[0] > 4) {
        for (int i = 5; i <= dim[0]; ++i)
            if (dim[static_cast<std::size_t>(i)] > 1)
                throw FormatError("dim[" + std::to_string(i) + "]: images beyond 4 dimensions are not supported");
    }
    Volume4D vol;
    for (int i = 1; i <= 4; ++i) {
        const short d = i <= dim[0] ? dim[static_cast<std::size_t>(i)] : short{1};
        if (d < 1) throw FormatError("dim[" + std::to_string(i) + "]: must be positive, found " + std::to_string(d));
        vol.dims[static_cast<std::size_t>(i - 1)] = d;
    }

    const short datatype = h.get<short>(70);
    const short bitpix = h.get<short>(72);
    if (datatype != kDtFloat32 && datatype != kDtInt16)
        throw FormatError("unsupported datatype code " + std::to_string(datatype) +
                          " (supported: 4 = int16, 16 = float32)");
    const short expected_bitpix = datatype == kDtFloat32 ? 32 : 16;
    if (bitpix != expected_bitpix)
        throw FormatError("bitpix: expected " + std::to_string(expected_bitpix) + " for datatype " +
                          std::to_string(datatype) + ", found " + std::to_string(bitpix));

    for (int i = 0; i < 3; ++i) {
        const float p = h.get<float>(80 + 4 * static_cast<std::size_t>(i));
        vol.voxel_size[static_cast<std::size_t>(i)] = (std::isfinite(p) && p > 0.0f) ? p : 1.0;
    }
    double tr = h.get<float>(92);
    const unsigned char xyzt_units = static_cast<unsigned char>(hdr[123]);
    switch (xyzt_units & 0x38) {
        case 16: tr *= 1e-3; break;  // msec
        case 24: tr *= 1e-6; break;  // usec
        default: break;
    }
    vol.tr_seconds = (std::isfinite(tr) && tr > 0.0) ? tr : 1.0;

    const float vox_offset = h.get<float>(108);
    const float slope = h.get<float>(112);
    const float inter = h.get<float>(116);

    std::ifstream img_file;
    std::istream* src = &in;
    if (single_file) {
        if (!(vox_offset >= kHeaderSize)) throw FormatError("vox_offset: must be at least 348 for single-file images");
        in.seekg(static_cast<std::streamoff>(vox_offset));
    } else {
        auto img = path;
        img.replace_extension(".img");
        img_file.open(img, std::ios::binary);
        if (!img_file) throw FormatError("cannot open image file " + img.string());
        img_file.seekg(static_cast<std::streamoff>(std::max(0.0f, vox_offset)));
        src = &img_file;
    }

    const std::size_t n = vol.cells_per_frame() * static_cast<std::size_t>(vol.dims[3]);
    const std::size_t width = static_cast<std::size_t>(bitpix / 8);
    std::vector<char> raw(n * width);
    if (!src->read(raw.data(), static_cast<std::streamsize>(raw.size())))
        throw FormatError("image data truncated: expected " + std::to_string(n) + " samples");

    vol.data.resize(n);
    const bool scale = datatype == kDtInt16 && slope != 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        const char* p = raw.data() + i * width;
        double v = datatype == kDtFloat32 ? static_cast<double>(read_sample<float>(p, host_swap))
                                          : static_cast<double>(read_sample<std::int16_t>(p, host_swap));
        if (scale) v = v * slope + inter;
        vol.data[i] = v;
    }
    return vol;
}

}  // namespace parcelforge
