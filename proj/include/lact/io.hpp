#pragma once

#include <map>
#include <string>
#include <vector>

#include "lact/core.hpp"
#include "lact/geometry.hpp"
#include "lact/nn/tape.hpp"

namespace lact {

// Binary tensor container: magic "LACT", u16 version, u8 dtype (0=f32,
// 1=f64), u8 ndim, u32 dims[ndim], row-major payload. All fields are
// little-endian.
struct TensorFile {
    uint8_t dtype = 1;
    std::vector<uint32_t> dims;
    std::vector<double> data;  // held as doubles regardless of file dtype

    size_t element_count() const;
};

void write_tensor(const std::string& path, const TensorFile& t);
TensorFile read_tensor(const std::string& path);

void write_image(const std::string& path, const Image& u);
Image read_image(const std::string& path);
void write_sinogram(const std::string& path, const Sinogram& y);
// geometry is re-attached by the caller (files carry shape only)
std::vector<std::vector<double>> read_matrix(const std::string& path, int& rows, int& cols);
Sinogram read_sinogram(const std::string& path, const ScanGeometry& g);

// Named-parameter archive: magic "LACK", u16 version, u32 count, then per
// entry u16 name length, name bytes, u8 frozen, embedded TensorFile record.
struct CheckpointEntry {
    std::string name;
    bool frozen = false;
    TensorFile tensor;
};

void checkpoint_save(const std::string& path, const nn::ParamStore& params);
std::vector<CheckpointEntry> checkpoint_read(const std::string& path);
// Partial load: every archive entry must exist in the store with matching
// shape; store entries absent from the archive keep their initialization.
void checkpoint_apply(nn::ParamStore& params, const std::vector<CheckpointEntry>& entries);
void checkpoint_load(const std::string& path, nn::ParamStore& params);

// 16-bit binary PGM, window [lo,hi] mapped to 0..65535.
void write_pgm(const std::string& path, const Image& u, double lo, double hi);
// side-by-side grid with a 2-pixel gap, windowed to the joint min/max
void write_pgm_grid(const std::string& path, const std::vector<Image>& images);

// Flat key=value configuration with [section] headers; keys become
// "section.key". Unknown keys (against the caller's schema) are rejected.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void validate_config_keys(const std::map<std::string, std::string>& cfg,
                          const std::vector<std::string>& known);

void append_line(const std::string& path, const std::string& header, const std::string& line);
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace lact
