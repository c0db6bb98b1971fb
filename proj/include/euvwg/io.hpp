#pragma once

// Field grids as CSV or raw binary, order tables, and JSON checkpoints.
// Every file is written to a temporary sibling and renamed into place.
//
// Binary field layout (little-endian):
//   "EUVWGFLD" | u32 version = 1 | char[4] dtype "c128" | u64 nx, ny, nz | u32 ncomp
//   | per component: u32 length + name bytes | nx + ny + nz float64 axis values
//   | per component, per (z, y, x) row-major: float64 re, float64 im

#include "euvwg/matching.hpp"
#include "euvwg/pinn.hpp"
#include "euvwg/wgno.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>

namespace euvwg {

using json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto* b = s.data();
    const auto r = std::from_chars(b, b + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != b + s.size()) throw IoError(where + ": bad number '" + s + "'");
    return v;
}

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("binary field: truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline void check_grid(const FieldGrid& f) {
    if (f.components.size() != f.data.size()) throw std::invalid_argument("field grid: component/data count mismatch");
    for (const auto& d : f.data)
        if (d.size() != f.samples()) throw std::invalid_argument("field grid: data length mismatch");
}

}  // namespace detail

/// CSV: `component,x,z,re,im` (2D: the single y sample is 0) or `component,x,y,z,re,im`.
inline std::string field_to_csv(const FieldGrid& f) {
    detail::check_grid(f);
    const bool with_y = f.ys.size() != 1 || f.ys.front() != 0.0;
    std::string s = with_y ? "component,x,y,z,re,im\n" : "component,x,z,re,im\n";
    for (std::size_t c = 0; c < f.components.size(); ++c)
        for (std::size_t iz = 0; iz < f.zs.size(); ++iz)
            for (std::size_t iy = 0; iy < f.ys.size(); ++iy)
                for (std::size_t ix = 0; ix < f.xs.size(); ++ix) {
                    const cplx v = f.at(c, ix, iy, iz);
                    s += f.components[c];
                    s += ',' + detail::fmt_double(f.xs[ix]);
                    if (with_y) s += ',' + detail::fmt_double(f.ys[iy]);
                    s += ',' + detail::fmt_double(f.zs[iz]) + ',' + detail::fmt_double(v.real()) + ',' +
                         detail::fmt_double(v.imag()) + '\n';
                }
    return s;
}

inline std::string field_to_binary(const FieldGrid& f) {
    detail::check_grid(f);
    std::string s = "EUVWGFLD";
    detail::put<std::uint32_t>(s, 1);
    s += "c128";
    detail::put<std::uint64_t>(s, f.xs.size());
    detail::put<std::uint64_t>(s, f.ys.size());
    detail::put<std::uint64_t>(s, f.zs.size());
    detail::put<std::uint32_t>(s, std::uint32_t(f.components.size()));
    for (const auto& c : f.components) {
        detail::put<std::uint32_t>(s, std::uint32_t(c.size()));
        s += c;
    }
    for (const auto* axis : {&f.xs, &f.ys, &f.zs})
        for (double v : *axis) detail::put(s, v);
    for (const auto& d : f.data)
        for (const cplx& v : d) {
            detail::put(s, v.real());
            detail::put(s, v.imag());
        }
    return s;
}

inline FieldGrid field_from_binary(const std::string& s) {
    if (s.size() < 8 || s.compare(0, 8, "EUVWGFLD") != 0) throw IoError("binary field: bad magic");
    std::size_t pos = 8;
    if (detail::take<std::uint32_t>(s, pos) != 1) throw IoError("binary field: unsupported version");
    if (pos + 4 > s.size() || s.compare(pos, 4, "c128") != 0) throw IoError("binary field: unsupported dtype");
    pos += 4;
    const auto nx = detail::take<std::uint64_t>(s, pos), ny = detail::take<std::uint64_t>(s, pos), nz = detail::take<std::uint64_t>(s, pos);
    const auto nc = detail::take<std::uint32_t>(s, pos);
    if (nx == 0 || ny == 0 || nz == 0 || nx * ny * nz * nc * 16 > s.size()) throw IoError("binary field: inconsistent header");
    FieldGrid f;
    for (std::uint32_t c = 0; c < nc; ++c) {
        const auto len = detail::take<std::uint32_t>(s, pos);
        if (pos + len > s.size()) throw IoError("binary field: truncated component name");
        f.components.push_back(s.substr(pos, len));
        pos += len;
    }
    for (auto [axis, n] : {std::pair{&f.xs, nx}, std::pair{&f.ys, ny}, std::pair{&f.zs, nz}})
        for (std::uint64_t i = 0; i < n; ++i) axis->push_back(detail::take<double>(s, pos));
    f.data.assign(nc, std::vector<cplx>(f.samples()));
    for (auto& d : f.data)
        for (auto& v : d) {
            const double re = detail::take<double>(s, pos);
            v = {re, detail::take<double>(s, pos)};
        }
    if (pos != s.size()) throw IoError("binary field: trailing bytes");
    return f;
}

inline FieldGrid field_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("csv field: empty file");
    const bool with_y = line == "component,x,y,z,re,im";
    if (!with_y && line != "component,x,z,re,im") throw IoError("csv field: unexpected header '" + line + "'");
    struct Row {
        std::string comp;
        double x, y, z;
        cplx v;
    };
    std::vector<Row> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != (with_y ? 6u : 5u)) throw IoError("csv field: wrong column count on line " + std::to_string(line_no));
        const std::string where = "csv field line " + std::to_string(line_no);
        std::size_t k = 1;
        Row r;
        r.comp = cells[0];
        r.x = detail::parse_double(cells[k++], where);
        r.y = with_y ? detail::parse_double(cells[k++], where) : 0.0;
        r.z = detail::parse_double(cells[k++], where);
        const double re = detail::parse_double(cells[k++], where);
        r.v = {re, detail::parse_double(cells[k], where)};
        rows.push_back(r);
    }
    FieldGrid f;
    auto add_unique = [](std::vector<double>& axis, double v) {
        if (std::find(axis.begin(), axis.end(), v) == axis.end()) axis.push_back(v);
    };
    for (const auto& r : rows) {
        if (std::find(f.components.begin(), f.components.end(), r.comp) == f.components.end()) f.components.push_back(r.comp);
        add_unique(f.xs, r.x);
        add_unique(f.ys, r.y);
        add_unique(f.zs, r.z);
    }
    if (rows.size() != f.components.size() * f.samples()) throw IoError("csv field: rows do not form a full grid");
    f.data.assign(f.components.size(), std::vector<cplx>(f.samples()));
    std::size_t i = 0;
    for (std::size_t c = 0; c < f.components.size(); ++c)
        for (std::size_t s = 0; s < f.samples(); ++s, ++i) {
            const auto& r = rows[i];
            const std::size_t ix = std::size_t(s % f.xs.size());
            const std::size_t iy = std::size_t((s / f.xs.size()) % f.ys.size());
            const std::size_t iz = std::size_t(s / (f.xs.size() * f.ys.size()));
            if (r.comp != f.components[c] || r.x != f.xs[ix] || r.y != f.ys[iy] || r.z != f.zs[iz])
                throw IoError("csv field: rows are not in component, z, y, x order");
            f.data[c][s] = r.v;
        }
    return f;
}

inline void export_field(const FieldGrid& f, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv")
        write_atomic(path, field_to_csv(f));
    else if (ext == ".bin")
        write_atomic(path, field_to_binary(f));
    else
        throw IoError("export_field: use a .csv or .bin extension (" + path.string() + ")");
}

inline FieldGrid import_field(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return field_from_csv(read_file(path));
    if (ext == ".bin") return field_from_binary(read_file(path));
    throw IoError("import_field: use a .csv or .bin extension (" + path.string() + ")");
}

/// One plane of a field grid: fixes y (axis = 'y') or x (axis = 'x') at the nearest sample.
inline FieldGrid field_slice(const FieldGrid& f, char axis, double value) {
    const auto& src = axis == 'x' ? f.xs : f.ys;
    if (axis != 'x' && axis != 'y') throw std::invalid_argument("field_slice: axis must be x or y");
    std::size_t best = 0;
    for (std::size_t i = 1; i < src.size(); ++i)
        if (std::abs(src[i] - value) < std::abs(src[best] - value)) best = i;
    FieldGrid s;
    s.components = f.components;
    s.xs = axis == 'x' ? std::vector<double>{f.xs[best]} : f.xs;
    s.ys = axis == 'y' ? std::vector<double>{f.ys[best]} : f.ys;
    s.zs = f.zs;
    s.data.assign(f.components.size(), {});
    for (std::size_t c = 0; c < f.components.size(); ++c)
        for (std::size_t iz = 0; iz < f.zs.size(); ++iz)
            for (std::size_t iy = 0; iy < s.ys.size(); ++iy)
                for (std::size_t ix = 0; ix < s.xs.size(); ++ix)
                    s.data[c].push_back(f.at(c, axis == 'x' ? best : ix, axis == 'y' ? best : iy, iz));
    return s;
}

inline std::string orders_to_csv(const OrderTable& t) {
    std::string s = "m,n,r0_re,r0_im,r1_re,r1_im,t0_re,t0_im,t1_re,t1_im,R,T\n";
    for (const auto& r : t.rows) {
        s += std::to_string(r.m) + ',' + std::to_string(r.n);
        for (const auto& v : {r.r[0], r.r[1], r.t[0], r.t[1]}) s += ',' + detail::fmt_double(v.real()) + ',' + detail::fmt_double(v.imag());
        s += ',' + detail::fmt_double(r.R) + ',' + detail::fmt_double(r.T) + '\n';
    }
    return s;
}

// ---- checkpoints ----------------------------------------------------------

namespace detail {

inline json params_to_json(const MlpParams& p) {
    json w = json::array(), b = json::array();
    for (std::size_t l = 0; l < p.layers(); ++l) {
        std::vector<double> rows;  // row-major
        rows.reserve(std::size_t(p.weights[l].size()));
        for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j) rows.push_back(p.weights[l](i, j));
        w.push_back(rows);
        b.push_back(std::vector<double>(p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
    }
    return {{"sizes", p.sizes}, {"weights", w}, {"biases", b}};
}

inline MlpParams params_from_json(const json& j) {
    MlpParams p;
    p.sizes = j.at("sizes").get<std::vector<int>>();
    const auto& w = j.at("weights");
    const auto& b = j.at("biases");
    if (p.sizes.size() < 2 || w.size() != p.sizes.size() - 1 || b.size() != w.size()) throw IoError("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        const auto rows = w[l].get<std::vector<double>>();
        const auto bias = b[l].get<std::vector<double>>();
        const int out = p.sizes[l + 1], in = p.sizes[l];
        if (rows.size() != std::size_t(out) * std::size_t(in) || bias.size() != std::size_t(out))
            throw IoError("checkpoint: weight shape mismatch in layer " + std::to_string(l));
        RMatrix m(out, in);
        for (int i = 0; i < out; ++i)
            for (int k = 0; k < in; ++k) m(i, k) = rows[std::size_t(i) * std::size_t(in) + std::size_t(k)];
        p.weights.push_back(std::move(m));
        p.biases.push_back(Eigen::Map<const RVector>(bias.data(), Eigen::Index(bias.size())));
    }
    p.validate();
    return p;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

inline json wgno_checkpoint(const WgnoModel& m) {
    json j = detail::params_to_json(m.params);
    j["format"] = "euvwg-checkpoint";
    j["version"] = kCheckpointVersion;
    j["kind"] = "wgno";
    j["fingerprint"] = detail::hex64(m.fingerprint);
    j["layout"] = m.layout;
    const auto& e = m.encoder;
    j["scales"] = {{"rhs", e.rhs_scale},
                   {"layers", e.layer_scales},
                   {"output", std::vector<double>(m.output_scale.data(), m.output_scale.data() + m.output_scale.size())}};
    j["encoder"] = {{"harmonics", e.harmonics}, {"rhs_size", e.rhs_size}, {"m", e.n_m}, {"n", e.n_n}};
    return j;
}

inline json pinn_checkpoint(const PinnModel& m) {
    json j = detail::params_to_json(m.params);
    j["format"] = "euvwg-checkpoint";
    j["version"] = kCheckpointVersion;
    j["kind"] = "pinn";
    const auto& q = m.problem;
    j["scales"] = {{"x", {q.x_lo, q.x_hi}}, {"z", {q.z_lo, q.z_hi}}};
    j["problem"] = {{"k0", q.k0}, {"kx", q.kx}, {"Lx", q.Lx}, {"polarization", to_string(q.pol)}};
    return j;
}

inline std::string checkpoint_kind(const json& j) {
    if (j.value("format", "") != "euvwg-checkpoint") throw IoError("not an euvwg checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
    return j.at("kind").get<std::string>();
}

inline WgnoModel wgno_from_checkpoint(const json& j) {
    if (checkpoint_kind(j) != "wgno") throw IoError("checkpoint is not a WGNO model");
    WgnoModel m;
    m.params = detail::params_from_json(j);
    const auto fp = j.at("fingerprint").get<std::string>();
    m.fingerprint = std::stoull(fp, nullptr, 16);
    m.layout = j.at("layout").get<std::string>();
    const auto& s = j.at("scales");
    const auto& e = j.at("encoder");
    m.encoder.rhs_scale = s.at("rhs").get<double>();
    m.encoder.layer_scales = s.at("layers").get<std::vector<double>>();
    const auto out = s.at("output").get<std::vector<double>>();
    m.output_scale = Eigen::Map<const RVector>(out.data(), Eigen::Index(out.size()));
    m.encoder.harmonics = e.at("harmonics").get<int>();
    m.encoder.rhs_size = e.at("rhs_size").get<int>();
    m.encoder.n_m = e.at("m").get<std::vector<int>>();
    m.encoder.n_n = e.at("n").get<std::vector<int>>();
    if (m.params.input_size() != m.encoder.size()) throw IoError("checkpoint: encoder does not match the network input");
    if (m.output_scale.size() && 2 * m.output_scale.size() != m.params.output_size())
        throw IoError("checkpoint: output scales do not match the network output");
    return m;
}

inline PinnModel pinn_from_checkpoint(const json& j) {
    if (checkpoint_kind(j) != "pinn") throw IoError("checkpoint is not a PINN model");
    PinnModel m;
    m.params = detail::params_from_json(j);
    const auto x = j.at("scales").at("x").get<std::vector<double>>();
    const auto z = j.at("scales").at("z").get<std::vector<double>>();
    if (x.size() != 2 || z.size() != 2) throw IoError("checkpoint: bad PINN scales");
    auto& q = m.problem;
    q.x_lo = x[0];
    q.x_hi = x[1];
    q.z_lo = z[0];
    q.z_hi = z[1];
    const auto& pr = j.at("problem");
    q.k0 = pr.at("k0").get<double>();
    q.kx = pr.at("kx").get<double>();
    q.Lx = pr.at("Lx").get<double>();
    q.pol = pr.at("polarization").get<std::string>() == "TM" ? Polarization::TM : Polarization::TE;
    return m;
}

inline void save_json(const json& j, const std::filesystem::path& path) { write_atomic(path, j.dump(1) + "\n"); }

inline json load_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

}  // namespace euvwg
