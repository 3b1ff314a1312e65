#pragma once

// File formats: trajectory CSV, the events sidecar that completes a
// TrajectoryRecord, and the binary MPS checkpoint.
//
// Checkpoint layout, all integers and doubles little-endian:
//   "MPSK"  u32 version  u64 sites
//   per site: u64 left, u64 phys, u64 right
//   per site: left*phys*right pairs of f64 (re, im), row-major (right fastest)
//   f64 time  u64 step  f64 cumulative error budget
//   f64 cumulative discarded weight  i64 canonical center (-1 = none)  f64 log-norm
//   u32 CRC-32 of every preceding byte

#include <xxzb/config.hpp>
#include <xxzb/errors.hpp>
#include <xxzb/mps.hpp>
#include <xxzb/tebd.hpp>
#include <xxzb/trajectory.hpp>

#include <boost/crc.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace xxzb {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed on " + p.string());
    return ss.str();
}

// Writes through a temporary in the same directory and renames into place.
inline void write_file_atomic(const fs::path& p, const std::string& bytes) {
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed on " + tmp.string());
    }
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

// ---- trajectory CSV ------------------------------------------------------

inline std::string csv_header(Index L) {
    std::string h = "t";
    for (Index i = 1; i <= L; ++i) h += ",z_" + std::to_string(i);
    for (Index k = 1; k < L; ++k) h += ",q_" + std::to_string(k);
    h += ",max_D,err_budget";
    return h;
}

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
    std::string s = csv_header(rec.length) + "\n";
    for (Index n = 0; n < rec.size(); ++n) {
        s += format_double(rec.times[n]);
        for (double z : rec.z_profile[n]) s += "," + format_double(z);
        for (double q : rec.q_profile[n]) s += "," + format_double(q);
        s += "," + std::to_string(rec.max_bond_dim[n]) + "," + format_double(rec.error_budget[n]) + "\n";
    }
    return s;
}

struct CsvTrajectory {
    Index length = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> z, q;
    std::vector<Index> max_D;
    std::vector<double> err_budget;
};

inline CsvTrajectory parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory CSV");
    Index cols = 1 + static_cast<Index>(std::count(line.begin(), line.end(), ','));
    // t + L + (L-1) + 2 columns
    if (cols < 4 || (cols - 2) % 2 != 0) throw IoError("trajectory CSV header has an unexpected column count");
    CsvTrajectory out;
    out.length = (cols - 2) / 2;
    if (line != csv_header(out.length)) throw IoError("trajectory CSV header does not match the schema");
    Index row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != cols) throw IoError("trajectory CSV row " + std::to_string(row) + " has the wrong width");
        auto num = [&](const std::string& c) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0')
                throw IoError("trajectory CSV row " + std::to_string(row) + ": bad number '" + c + "'");
            return v;
        };
        const Index L = out.length;
        out.times.push_back(num(cells[0]));
        std::vector<double> z, q;
        for (Index i = 0; i < L; ++i) z.push_back(num(cells[1 + i]));
        for (Index k = 0; k + 1 < L; ++k) q.push_back(num(cells[1 + L + k]));
        out.z.push_back(std::move(z));
        out.q.push_back(std::move(q));
        out.max_D.push_back(static_cast<Index>(num(cells[2 * L])));
        out.err_budget.push_back(num(cells[2 * L + 1]));
    }
    return out;
}

// ---- events sidecar ------------------------------------------------------

// The parts of a TrajectoryRecord that the CSV does not carry.
inline Json events_json(const TrajectoryRecord& rec) {
    Json j;
    j["length"] = rec.length;
    j["junction_bond"] = rec.junction_bond;
    j["steps"] = rec.steps;
    j["norm"] = rec.norm;
    j["cumulative_discarded_weight"] = rec.cumulative_discarded_weight;
    Json comp = Json::array();
    for (const auto& c : rec.compressions)
        comp.push_back({{"step", c.step}, {"time", c.time}, {"infidelity", c.infidelity}, {"sweeps", c.sweeps}});
    j["compressions"] = comp;
    Json al = Json::array();
    for (const auto& a : rec.alarms)
        al.push_back({{"step", a.step},
                      {"time", a.time},
                      {"kind", to_string(a.kind)},
                      {"value", a.value},
                      {"max_bond_dim", a.max_bond_dim}});
    j["alarms"] = al;
    return j;
}

inline TrajectoryRecord assemble_record(const CsvTrajectory& csv, const Json& ev) {
    TrajectoryRecord rec;
    try {
        rec.length = ev.at("length").get<Index>();
        rec.junction_bond = ev.at("junction_bond").get<Index>();
        const auto steps = ev.at("steps").get<std::vector<Index>>();
        const auto norm = ev.at("norm").get<std::vector<double>>();
        const auto disc = ev.at("cumulative_discarded_weight").get<std::vector<double>>();
        if (rec.length != csv.length || steps.size() != csv.times.size() || norm.size() != steps.size() ||
            disc.size() != steps.size())
            throw IoError("events sidecar does not match the trajectory CSV");
        for (Index n = 0; n < steps.size(); ++n)
            rec.append(steps[n], csv.times[n], csv.z[n], csv.q[n], norm[n], csv.max_D[n], disc[n], csv.err_budget[n]);
        for (const auto& c : ev.at("compressions"))
            rec.compressions.push_back({c.at("step").get<Index>(), c.at("time").get<double>(),
                                        c.at("infidelity").get<double>(), c.at("sweeps").get<int>()});
        for (const auto& a : ev.at("alarms")) {
            const auto kind = a.at("kind").get<std::string>();
            if (kind != "truncation" && kind != "compression") throw IoError("unknown alarm kind '" + kind + "'");
            rec.alarms.push_back({a.at("step").get<Index>(), a.at("time").get<double>(),
                                  kind == "truncation" ? AlarmKind::Truncation : AlarmKind::Compression,
                                  a.at("value").get<double>(), a.at("max_bond_dim").get<Index>()});
        }
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed events sidecar: ") + e.what());
    }
    return rec;
}

// Keeps the rows and events with step <= last.
inline TrajectoryRecord truncate_record(const TrajectoryRecord& rec, Index last) {
    TrajectoryRecord out;
    out.length = rec.length;
    out.junction_bond = rec.junction_bond;
    for (Index n = 0; n < rec.size() && rec.steps[n] <= last; ++n)
        out.append(rec.steps[n], rec.times[n], rec.z_profile[n], rec.q_profile[n], rec.norm[n], rec.max_bond_dim[n],
                   rec.cumulative_discarded_weight[n], rec.error_budget[n]);
    for (const auto& c : rec.compressions)
        if (c.step <= last) out.compressions.push_back(c);
    for (const auto& a : rec.alarms)
        if (a.step <= last) out.alarms.push_back(a);
    return out;
}

inline void append_record(TrajectoryRecord& head, const TrajectoryRecord& tail) {
    for (Index n = 0; n < tail.size(); ++n)
        head.append(tail.steps[n], tail.times[n], tail.z_profile[n], tail.q_profile[n], tail.norm[n],
                    tail.max_bond_dim[n], tail.cumulative_discarded_weight[n], tail.error_budget[n]);
    head.compressions.insert(head.compressions.end(), tail.compressions.begin(), tail.compressions.end());
    head.alarms.insert(head.alarms.end(), tail.alarms.begin(), tail.alarms.end());
}

inline void save_record(const fs::path& dir, const TrajectoryRecord& rec) {
    write_file_atomic(dir / "trajectory.csv", trajectory_csv(rec));
    write_file_atomic(dir / "events.json", events_json(rec).dump(2) + "\n");
}

inline TrajectoryRecord load_record(const fs::path& dir) {
    const auto csv = parse_trajectory_csv(read_file(dir / "trajectory.csv"));
    Json ev;
    try {
        ev = Json::parse(read_file(dir / "events.json"));
    } catch (const Json::parse_error& e) {
        throw IoError(std::string("events sidecar is not JSON: ") + e.what());
    }
    return assemble_record(csv, ev);
}

// ---- checkpoint ----------------------------------------------------------

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    MatrixProductState state;
    StepState at;
};

namespace detail {

inline void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_f64(std::string& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
  public:
    explicit ByteReader(const std::string& b) : b_(b) {}
    std::uint64_t uint(int bytes) {
        if (pos_ + bytes > b_.size()) throw IoError("checkpoint is truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += bytes;
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t pos() const { return pos_; }

  private:
    const std::string& b_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32(const char* data, std::size_t n) {
    boost::crc_32_type crc;
    crc.process_bytes(data, n);
    return crc.checksum();
}

} // namespace detail

inline std::string encode_checkpoint(const MatrixProductState& psi, const StepState& at) {
    std::string b = "MPSK";
    detail::put_u32(b, kCheckpointVersion);
    detail::put_u64(b, psi.length());
    for (const auto& s : psi.sites())
        for (Index a = 0; a < 3; ++a) detail::put_u64(b, s.extent(a));
    for (const auto& s : psi.sites())
        for (const cplx& v : s.data()) {
            detail::put_f64(b, v.real());
            detail::put_f64(b, v.imag());
        }
    detail::put_f64(b, at.time);
    detail::put_u64(b, at.step);
    detail::put_f64(b, at.error_budget);
    detail::put_f64(b, at.discarded_weight);
    const auto c = psi.ortho_center();
    detail::put_u64(b, c ? static_cast<std::uint64_t>(*c) : ~std::uint64_t{0});
    detail::put_f64(b, psi.log_norm_adjust());
    detail::put_u32(b, detail::crc32(b.data(), b.size()));
    return b;
}

inline Checkpoint decode_checkpoint(const std::string& b) {
    if (b.size() < 4 + 4 + 8 + 4 || b.compare(0, 4, "MPSK") != 0) throw IoError("not a checkpoint (bad magic)");
    const std::size_t body = b.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(static_cast<unsigned char>(b[body + i])) << (8 * i);
    if (stored != detail::crc32(b.data(), body)) throw IoError("checkpoint CRC mismatch");

    detail::ByteReader r(b);
    r.u32();  // magic
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto n = r.u64();
    if (n == 0 || n > (body / 24)) throw IoError("checkpoint site count is implausible");
    std::vector<Shape> shapes;
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Shape s{r.u64(), r.u64(), r.u64()};
        const auto sz = s[0] * s[1] * s[2];
        if (sz == 0 || sz > body) throw IoError("checkpoint site extents are implausible");
        total += sz;
        shapes.push_back(s);
    }
    if (r.pos() + total * 16 + 48 != body) throw IoError("checkpoint length does not match its header");
    std::vector<DenseTensor> sites;
    for (const auto& s : shapes) {
        std::vector<cplx> data(s[0] * s[1] * s[2]);
        for (auto& v : data) {
            const double re = r.f64();
            v = cplx(re, r.f64());
        }
        sites.emplace_back(s, std::move(data));
    }
    Checkpoint ck;
    ck.at.time = r.f64();
    ck.at.step = r.u64();
    ck.at.error_budget = r.f64();
    ck.at.discarded_weight = r.f64();
    const auto center = r.u64();
    const double log_norm = r.f64();
    std::optional<Index> c;
    if (center != ~std::uint64_t{0}) {
        if (center >= n) throw IoError("checkpoint canonical center out of range");
        c = static_cast<Index>(center);
    }
    try {
        ck.state = MatrixProductState(std::move(sites), c, log_norm);
    } catch (const Error& e) {
        throw IoError(std::string("checkpoint tensors are inconsistent: ") + e.what());
    }
    return ck;
}

inline void write_checkpoint(const fs::path& p, const MatrixProductState& psi, const StepState& at) {
    write_file_atomic(p, encode_checkpoint(psi, at));
}

inline Checkpoint read_checkpoint(const fs::path& p) { return decode_checkpoint(read_file(p)); }

inline std::string checkpoint_name(Index step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%08llu", static_cast<unsigned long long>(step));
    return buf;
}

} // namespace xxzb
