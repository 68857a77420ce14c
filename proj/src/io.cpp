#include "lact/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lact {

namespace {

void put_bytes(std::string& out, const void* p, size_t n) {
    out.append(static_cast<const char*>(p), n);
}

void put_u16(std::string& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    put_bytes(out, b, 2);
}

void put_u32(std::string& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 4);
}

void put_u64(std::string& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 8);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    std::string where;

    void need(size_t n) {
        if (pos + n > buf.size())
            throw io_error(where + ": truncated at byte offset " + std::to_string(pos));
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint8_t>(buf[pos + 1]) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void serialize_tensor(std::string& out, const TensorFile& t) {
    if (t.dtype > 1) throw parameter_error("tensor file: unknown dtype code");
    if (t.data.size() != t.element_count())
        throw dimension_error("tensor file: payload does not match dims");
    out.append("LACT");
    put_u16(out, 1);
    out.push_back(static_cast<char>(t.dtype));
    out.push_back(static_cast<char>(t.dims.size()));
    for (uint32_t d : t.dims) put_u32(out, d);
    if (t.dtype == 1) {
        for (double x : t.data) put_u64(out, std::bit_cast<uint64_t>(x));
    } else {
        for (double x : t.data) {
            float f = static_cast<float>(x);
            put_u32(out, std::bit_cast<uint32_t>(f));
        }
    }
}

TensorFile deserialize_tensor(Reader& r) {
    size_t start = r.pos;
    std::string magic = r.bytes(4);
    if (magic != "LACT")
        throw io_error(r.where + ": bad magic at byte offset " + std::to_string(start));
    uint16_t version = r.u16();
    if (version != 1)
        throw io_error(r.where + ": unsupported version " + std::to_string(version));
    TensorFile t;
    t.dtype = r.u8();
    if (t.dtype > 1) throw io_error(r.where + ": unknown dtype code");
    uint8_t ndim = r.u8();
    t.dims.resize(ndim);
    for (int i = 0; i < ndim; ++i) t.dims[i] = r.u32();
    size_t count = t.element_count();
    t.data.resize(count);
    if (t.dtype == 1) {
        for (size_t i = 0; i < count; ++i) t.data[i] = std::bit_cast<double>(r.u64());
    } else {
        for (size_t i = 0; i < count; ++i) t.data[i] = std::bit_cast<float>(r.u32());
    }
    return t;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw io_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw io_error("cannot rename " + tmp + " to " + path);
}

}  // namespace

size_t TensorFile::element_count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

void write_tensor(const std::string& path, const TensorFile& t) {
    std::string out;
    serialize_tensor(out, t);
    write_file_atomic(path, out);
}

TensorFile read_tensor(const std::string& path) {
    std::string buf = read_file(path);
    Reader r{buf, 0, path};
    TensorFile t = deserialize_tensor(r);
    if (r.pos != buf.size())
        throw io_error(path + ": trailing bytes at offset " + std::to_string(r.pos));
    return t;
}

void write_image(const std::string& path, const Image& u) {
    TensorFile t;
    t.dims = {static_cast<uint32_t>(u.height), static_cast<uint32_t>(u.width)};
    t.data = u.data;
    write_tensor(path, t);
}

Image read_image(const std::string& path) {
    TensorFile t = read_tensor(path);
    if (t.dims.size() != 2) throw io_error(path + ": expected a 2-d tensor");
    Image u(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    u.data = t.data;
    return u;
}

void write_sinogram(const std::string& path, const Sinogram& y) {
    TensorFile t;
    t.dims = {static_cast<uint32_t>(y.views()), static_cast<uint32_t>(y.bins())};
    t.data = y.data;
    write_tensor(path, t);
}

Sinogram read_sinogram(const std::string& path, const ScanGeometry& g) {
    TensorFile t = read_tensor(path);
    if (t.dims.size() != 2) throw io_error(path + ": expected a 2-d tensor");
    if (static_cast<int>(t.dims[0]) != g.n_views() || static_cast<int>(t.dims[1]) != g.n_detectors)
        throw dimension_error(path + ": sinogram shape does not match the geometry flags");
    Sinogram y(g);
    y.data = t.data;
    return y;
}

void checkpoint_save(const std::string& path, const nn::ParamStore& params) {
    std::string out;
    out.append("LACK");
    put_u16(out, 1);
    put_u32(out, static_cast<uint32_t>(params.entries.size()));
    for (const auto& e : params.entries) {
        put_u16(out, static_cast<uint16_t>(e.name.size()));
        out.append(e.name);
        out.push_back(e.frozen ? 1 : 0);
        TensorFile t;
        t.dims = {static_cast<uint32_t>(e.value.ch), static_cast<uint32_t>(e.value.h),
                  static_cast<uint32_t>(e.value.w)};
        t.data = e.value.v;
        serialize_tensor(out, t);
    }
    write_file_atomic(path, out);
}

std::vector<CheckpointEntry> checkpoint_read(const std::string& path) {
    std::string buf = read_file(path);
    Reader r{buf, 0, path};
    if (r.bytes(4) != "LACK") throw io_error(path + ": bad magic at byte offset 0");
    uint16_t version = r.u16();
    if (version != 1) throw io_error(path + ": unsupported checkpoint version");
    uint32_t count = r.u32();
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        uint16_t len = r.u16();
        e.name = r.bytes(len);
        e.frozen = r.u8() != 0;
        e.tensor = deserialize_tensor(r);
        entries.push_back(std::move(e));
    }
    return entries;
}

void checkpoint_apply(nn::ParamStore& params, const std::vector<CheckpointEntry>& entries) {
    for (const CheckpointEntry& e : entries) {
        int idx = params.find(e.name);
        if (idx < 0) throw parameter_error("checkpoint: unknown parameter " + e.name);
        nn::ParamStore::Entry& p = params.entries[idx];
        if (e.tensor.dims.size() != 3 || static_cast<int>(e.tensor.dims[0]) != p.value.ch ||
            static_cast<int>(e.tensor.dims[1]) != p.value.h ||
            static_cast<int>(e.tensor.dims[2]) != p.value.w)
            throw dimension_error("checkpoint: shape mismatch for parameter " + e.name);
        p.value.v = e.tensor.data;
        p.frozen = e.frozen;
    }
}

void checkpoint_load(const std::string& path, nn::ParamStore& params) {
    checkpoint_apply(params, checkpoint_read(path));
}

void write_pgm(const std::string& path, const Image& u, double lo, double hi) {
    if (!(hi > lo)) throw parameter_error("pgm: window must satisfy hi > lo");
    std::string out = "P5\n" + std::to_string(u.width) + " " + std::to_string(u.height) +
                      "\n65535\n";
    out.reserve(out.size() + u.data.size() * 2);
    for (double v : u.data) {
        double q = (v - lo) / (hi - lo);
        int val = static_cast<int>(q * 65535.0 + 0.5);
        val = std::max(0, std::min(65535, val));
        out.push_back(static_cast<char>((val >> 8) & 0xff));  // most significant byte first
        out.push_back(static_cast<char>(val & 0xff));
    }
    write_file_atomic(path, out);
}

void write_pgm_grid(const std::string& path, const std::vector<Image>& images) {
    if (images.empty()) throw parameter_error("pgm grid: no images");
    int h = images[0].height;
    double lo = images[0].data[0], hi = images[0].data[0];
    int total_w = 0;
    for (const Image& im : images) {
        if (im.height != h) throw dimension_error("pgm grid: image heights differ");
        total_w += im.width;
        for (double v : im.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const int gap = 2;
    total_w += gap * (static_cast<int>(images.size()) - 1);
    if (!(hi > lo)) hi = lo + 1.0;
    Image grid(h, total_w, lo);
    int x0 = 0;
    for (const Image& im : images) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < im.width; ++c) grid.at(r, x0 + c) = im.at(r, c);
        x0 += im.width + gap;
    }
    write_pgm(path, grid, lo, hi);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    std::map<std::string, std::string> out;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw io_error(path + ":" + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            size_t b2 = s.find_first_not_of(" \t");
            size_t e2 = s.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw io_error(path + ":" + std::to_string(lineno) + ": empty key");
        out[section.empty() ? key : section + "." + key] = val;
    }
    return out;
}

void validate_config_keys(const std::map<std::string, std::string>& cfg,
                          const std::vector<std::string>& known) {
    for (const auto& [key, value] : cfg) {
        (void)value;
        bool ok = false;
        for (const std::string& k : known)
            if (k == key) ok = true;
        if (!ok) throw parameter_error("config: unknown key '" + key + "'");
    }
}

void append_line(const std::string& path, const std::string& header, const std::string& line) {
    bool exists = false;
    {
        std::ifstream in(path);
        exists = in.good();
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw io_error("cannot open " + path + " for appending");
    if (!exists && !header.empty()) out << header << "\n";
    out << line << "\n";
    if (!out) throw io_error("short write to " + path);
}

void write_text_atomic(const std::string& path, const std::string& content) {
    write_file_atomic(path, content);
}

}  // namespace lact
