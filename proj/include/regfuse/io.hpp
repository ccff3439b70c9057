#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "regfuse/geometry.hpp"

namespace regfuse::io {

// Point clouds: one "x y z" per line, '#' lines and blank lines ignored.
PointCloud read_cloud(std::istream& in);
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(std::ostream& out, const PointCloud& cloud);

// Transforms: 4 rows of 4 numbers, row-major homogeneous matrix.
RigidTransform read_transform(std::istream& in);
RigidTransform read_transform(const std::filesystem::path& path);
void write_transform(std::ostream& out, const RigidTransform& t);

// Overlap masks: one 0/1 per line.
std::vector<bool> read_mask(const std::filesystem::path& path);
void write_mask(std::ostream& out, const std::vector<bool>& mask);

/// Writes via a sibling temporary file and renames it into place, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Fixed 6-significant-digit formatting used in every CSV the tools emit.
std::string format_csv_number(double v);

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);
void save_transform(const std::filesystem::path& path, const RigidTransform& t);
void save_mask(const std::filesystem::path& path, const std::vector<bool>& mask);

}  // namespace regfuse::io
