#include "qdnw/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>

#include "qdnw/errors.hpp"

namespace qdnw {

namespace {

constexpr char kMagic[8] = {'Q', 'D', 'N', 'W', 'G', 'F', '0', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary field format assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error(ErrorKind::IoError, "truncated field file");
    return v;
}

}  // namespace

void write_field_binary(const std::string& path, const GridField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
    const Grid& g = f.grid;
    const std::uint32_t ndim = static_cast<std::uint32_t>(g.d + 1);
    os.write(kMagic, sizeof(kMagic));
    put(os, kVersion);
    put(os, ndim);
    put(os, g.dt);
    for (int a = 0; a < g.d; ++a) put(os, g.dx[a]);
    put(os, static_cast<std::uint64_t>(g.nt + 1));
    for (int a = 0; a < g.d; ++a) put(os, static_cast<std::uint64_t>(g.nodes[a]));
    put(os, 0.0);
    for (int a = 0; a < g.d; ++a) put(os, g.lower[a]);
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!os) throw Error(ErrorKind::IoError, "write failed for " + path);
}

GridField read_field_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::IoError, "cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(ErrorKind::IoError, "bad magic in " + path);
    if (get<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::IoError, "unsupported field version");
    const std::uint32_t ndim = get<std::uint32_t>(is);
    if (ndim < 2 || ndim > 3) throw Error(ErrorKind::IoError, "unsupported dimension count");
    Grid g;
    g.d = static_cast<int>(ndim) - 1;
    g.dt = get<double>(is);
    for (int a = 0; a < g.d; ++a) g.dx[a] = get<double>(is);
    g.nt = static_cast<int>(get<std::uint64_t>(is)) - 1;
    for (int a = 0; a < g.d; ++a) g.nodes[a] = static_cast<int>(get<std::uint64_t>(is));
    (void)get<double>(is);
    for (int a = 0; a < g.d; ++a) {
        g.lower[a] = get<double>(is);
        g.upper[a] = g.lower[a] + (g.nodes[a] - 1) * g.dx[a];
    }
    g.T = g.nt * g.dt;
    GridField f = GridField::zeros(g);
    is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!is) throw Error(ErrorKind::IoError, "truncated field values in " + path);
    return f;
}

void write_field_csv(std::ostream& os, const GridField& f, int stride) {
    const Grid& g = f.grid;
    os << (g.d == 1 ? "t,x,value\n" : "t,x,y,value\n");
    os.precision(12);
    for (int n = 0; n <= g.nt; n += std::max(1, stride)) {
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                os << g.t(n) << "," << g.x(i);
                if (g.d == 2) os << "," << g.y(j);
                os << "," << f.at(n, i, j) << "\n";
            }
        }
    }
}

}  // namespace qdnw
