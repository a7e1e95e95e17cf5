#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "strobosq/dynamics.hpp"
#include "strobosq/errors.hpp"

namespace strobosq {

namespace {

constexpr char magic[8] = {'S', 'S', 'Q', 'T', 'R', 'J', '0', '1'};
constexpr std::uint32_t format_version = 1;

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(b[i], b[sizeof(T) - 1 - i]);
        }
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) {
            throw FormatError("cannot open checkpoint for writing: " + path.string());
        }
    }
    template <class T>
    void put(T v) {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
    void finish() {
        out_.flush();
        if (!out_) {
            throw FormatError("write failed");
        }
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) {
            throw FormatError("cannot open checkpoint: " + path.string());
        }
    }
    template <class T>
    T get() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) {
            throw FormatError("truncated checkpoint");
        }
        return to_little(v);
    }
    void raw(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (!in_) {
            throw FormatError("truncated checkpoint");
        }
    }
    bool at_end() { return in_.peek() == std::ifstream::traits_type::eof(); }

private:
    std::ifstream in_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const EnsembleCheckpoint& data) {
    const auto n_steps = static_cast<std::size_t>(data.grid.n_steps);
    for (const auto& r : data.records) {
        if (r.atom.size() != n_steps || r.light_out.size() != n_steps) {
            throw FormatError("record length does not match the grid");
        }
    }

    Writer w(path);
    w.raw(magic, sizeof magic);
    w.put<std::uint32_t>(format_version);
    w.put<std::uint32_t>(0);
    w.put<std::uint64_t>(data.records.size());
    w.put<std::int64_t>(data.grid.n_steps);
    w.put<double>(data.grid.dt);
    w.put<double>(data.grid.total_time);
    w.put<std::int32_t>(data.grid.samples_per_period);
    w.put<std::int32_t>(data.grid.window_samples);
    w.put<std::int32_t>(data.grid.window_start);
    w.put<std::int32_t>(0);
    w.put<double>(data.strobo.duty);
    w.put<double>(data.strobo.omega_m);
    w.put<double>(data.strobo.phase);
    w.put<double>(data.larmor);
    w.put<std::uint64_t>(data.base_seed);
    for (const auto& r : data.records) {
        w.put<std::uint64_t>(r.seed);
        w.put<double>(r.final_atom[0]);
        w.put<double>(r.final_atom[1]);
        for (std::size_t j = 0; j < n_steps; ++j) {
            w.put<double>(r.atom[j][0]);
            w.put<double>(r.atom[j][1]);
            w.put<double>(r.light_out[j][0]);
            w.put<double>(r.light_out[j][1]);
        }
    }
    w.finish();
}

EnsembleCheckpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char head[8];
    r.raw(head, sizeof head);
    if (std::memcmp(head, magic, sizeof magic) != 0) {
        throw FormatError("not a trajectory checkpoint: " + path.string());
    }
    const auto version = r.get<std::uint32_t>();
    if (version != format_version) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    r.get<std::uint32_t>();

    EnsembleCheckpoint data;
    const auto n_records = r.get<std::uint64_t>();
    data.grid.n_steps = r.get<std::int64_t>();
    data.grid.dt = r.get<double>();
    data.grid.total_time = r.get<double>();
    data.grid.samples_per_period = r.get<std::int32_t>();
    data.grid.window_samples = r.get<std::int32_t>();
    data.grid.window_start = r.get<std::int32_t>();
    r.get<std::int32_t>();
    data.strobo.duty = r.get<double>();
    data.strobo.omega_m = r.get<double>();
    data.strobo.phase = r.get<double>();
    data.larmor = r.get<double>();
    data.base_seed = r.get<std::uint64_t>();
    if (data.grid.n_steps < 0 || data.grid.samples_per_period <= 0) {
        throw FormatError("corrupt checkpoint header");
    }

    const auto n_steps = static_cast<std::size_t>(data.grid.n_steps);
    data.records.resize(n_records);
    for (auto& rec : data.records) {
        rec.seed = r.get<std::uint64_t>();
        rec.final_atom[0] = r.get<double>();
        rec.final_atom[1] = r.get<double>();
        rec.times.resize(n_steps);
        rec.atom.resize(n_steps);
        rec.light_out.resize(n_steps);
        for (std::size_t j = 0; j < n_steps; ++j) {
            rec.times[j] = static_cast<double>(j) * data.grid.dt;
            rec.atom[j][0] = r.get<double>();
            rec.atom[j][1] = r.get<double>();
            rec.light_out[j][0] = r.get<double>();
            rec.light_out[j][1] = r.get<double>();
        }
    }
    if (!r.at_end()) {
        throw FormatError("trailing bytes in checkpoint");
    }
    return data;
}

}  // namespace strobosq
