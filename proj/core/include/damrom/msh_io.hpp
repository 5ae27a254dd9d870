#pragma once

#include <filesystem>
#include <iosfwd>

#include "damrom/mesh.hpp"

namespace damrom {

/// Reads a Gmsh ASCII mesh (format 2.2 or 4.1). Boundary lines must belong
/// to physical groups named UD, UW, B, D or T; 2D cells must be 3-node
/// triangles. Errors are ParseError with the offending line number, or
/// MeshError when the parsed mesh fails validation.
Mesh read_msh(const std::filesystem::path& path);
Mesh parse_msh(std::istream& in);

/// Writes the mesh as Gmsh ASCII 2.2 with one physical group per tag.
/// Coordinates are printed with round-trip precision.
void write_msh(const Mesh& mesh, const std::filesystem::path& path);
void write_msh(const Mesh& mesh, std::ostream& out);

}  // namespace damrom
