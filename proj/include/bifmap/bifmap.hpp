#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/mesh.hpp"
#include "bifmap/mesh_io.hpp"
#include "bifmap/geometry.hpp"
#include "bifmap/geodesics.hpp"
#include "bifmap/primitives.hpp"
#include "bifmap/lanczos.hpp"
#include "bifmap/spectral.hpp"
#include "bifmap/descriptors.hpp"
#include "bifmap/operators.hpp"
#include "bifmap/fmap.hpp"
#include "bifmap/evaluation.hpp"
#include "bifmap/pipeline.hpp"
