#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdnw/errors.hpp"
#include "qdnw/field_io.hpp"

using namespace qdnw;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("qdnw_io_" + name)).string();
}

GridField sample_field(int d) {
    const auto m = MetricSpec::minkowski(d);
    std::vector<double> lo(d, -1.0), hi(d, 1.0);
    std::vector<int> cells(d, 8);
    const Grid g = Grid::make(m, 0.5, lo, hi, cells, 0.5);
    return GridField::sample(g, [](const Point& x) { return x.sum() + 0.25 * x[0] * x[0]; });
}

void expect_error(const std::string& path, ErrorKind kind) {
    try {
        (void)read_field_binary(path);
        FAIL() << path;
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

}  // namespace

TEST(FieldIo, BinaryRoundTrip) {
    for (int d : {1, 2}) {
        const GridField f = sample_field(d);
        const std::string path = temp_path("rt" + std::to_string(d));
        write_field_binary(path, f);
        const GridField back = read_field_binary(path);
        EXPECT_EQ(back.grid.d, d);
        EXPECT_EQ(back.grid.nt, f.grid.nt);
        EXPECT_EQ(back.grid.nodes, f.grid.nodes);
        EXPECT_DOUBLE_EQ(back.grid.dt, f.grid.dt);
        EXPECT_DOUBLE_EQ(back.grid.lower[0], -1.0);
        EXPECT_NEAR(back.grid.upper[0], 1.0, 1e-14);
        EXPECT_EQ(back.values, f.values);
        std::remove(path.c_str());
    }
}

TEST(FieldIo, HeaderLayout) {
    const GridField f = sample_field(1);
    const std::string path = temp_path("layout");
    write_field_binary(path, f);
    // magic 8 + version 4 + ndim 4 + dt 8 + dx 8 + counts 16 + origin 16
    const auto expected = 8 + 4 + 4 + 8 + 8 + 16 + 16 + f.values.size() * sizeof(double);
    EXPECT_EQ(std::filesystem::file_size(path), expected);
    std::ifstream is(path, std::ios::binary);
    char magic[8];
    is.read(magic, 8);
    EXPECT_EQ(std::string(magic, 8), "QDNWGF01");
    std::remove(path.c_str());
}

TEST(FieldIo, Errors) {
    expect_error(temp_path("does_not_exist"), ErrorKind::IoError);
    const std::string bad = temp_path("bad");
    {
        std::ofstream os(bad, std::ios::binary);
        os << "NOTAFIELD-------";
    }
    expect_error(bad, ErrorKind::IoError);
    const GridField f = sample_field(1);
    write_field_binary(bad, f);
    std::filesystem::resize_file(bad, std::filesystem::file_size(bad) - 8);
    expect_error(bad, ErrorKind::IoError);
    std::remove(bad.c_str());
}

TEST(FieldIo, CsvRows) {
    const GridField f = sample_field(2);
    std::ostringstream os;
    write_field_csv(os, f, 2);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x,y,value");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    const int levels = f.grid.nt / 2 + 1;
    EXPECT_EQ(rows, levels * 81);
}
