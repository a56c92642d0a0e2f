#pragma once

#include "surfmap/annotate.hpp"
#include "surfmap/fuse.hpp"
#include "surfmap/types.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace surfmap {

/// Triangle mesh with one surface class per face.
struct SemanticMesh {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi faces;
  std::vector<std::uint8_t> face_classes;

  Eigen::Index num_vertices() const { return vertices.cols(); }
  Eigen::Index num_faces() const { return faces.cols(); }
};

struct TriangulateOptions {
  double max_edge_factor = 3.0;  // faces with an edge longer than this many cells are dropped
};

/// Delaunay triangulation of the observed cell centres, lifted to each cell's
/// mean elevation. Face class is the majority of its vertex classes (lowest
/// index when all three differ). Throws TooFewPatches below three observed cells.
SemanticMesh triangulate_map(const FinalizedMap& map, const TriangulateOptions& options = {});

/// Delaunay triangles of integer lattice points, as index triples (counter-clockwise).
std::vector<std::array<int, 3>> delaunay_triangles(const std::vector<Eigen::Vector2i>& points);

/// Marks vertices that lie on an edge used by exactly one face.
std::vector<bool> boundary_vertices(const SemanticMesh& mesh);

/// Uniform umbrella operator: row v holds 1/deg(v) for each one-ring neighbour
/// and -1 on the diagonal. Rows of boundary vertices are zero.
Eigen::SparseMatrix<double> umbrella_operator(const SemanticMesh& mesh);

/// L(v) for every vertex (3 x n), zero on the boundary.
Eigen::Matrix3Xd umbrella_laplacian(const SemanticMesh& mesh);

struct TaubinOptions {
  double lambda = 0.5;
  double mu = -0.53;
  int iterations = 10;
};

/// Per iteration: v += lambda * L(v), then v += mu * L(v). Boundary vertices stay fixed.
/// Throws InvalidArgument unless lambda > 0 and mu < -lambda.
SemanticMesh taubin_smooth(const SemanticMesh& mesh, const TaubinOptions& options = {});

struct RenderedLabelImage {
  AnnotationImage labels;
  Raster<double> depth;  // +inf where nothing was drawn
};

/// Flat-shaded, depth-tested software render of the mesh. The nearest face
/// wins; on equal depth the lower face index wins.
RenderedLabelImage render_mesh(const SemanticMesh& mesh, const CameraView& view,
                               double near = kDefaultNearPlane);

}  // namespace surfmap
