#pragma once

#include <filesystem>

#include "parcelforge/dataset.hpp"

namespace parcelforge {

/// Read an uncompressed NIfTI-1 image (float32 or int16, either byte order).
///
/// Single-file images ("n+1") are read from `path` starting at vox_offset;
/// header/image pairs ("ni1") read the voxel data from the sibling `.img`.
/// The TR comes from pixdim[4], converted to seconds using xyzt_units.
Volume4D load_nifti(const std::filesystem::path& path);

}  // namespace parcelforge
