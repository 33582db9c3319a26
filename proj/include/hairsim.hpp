#pragma once

#include "hairsim/types.hpp"
#include "hairsim/geometry.hpp"
#include "hairsim/bvh.hpp"
#include "hairsim/kdtree.hpp"
#include "hairsim/parallel.hpp"
#include "hairsim/rig.hpp"
#include "hairsim/mvc.hpp"
#include "hairsim/splat_points.hpp"
#include "hairsim/splat_deform.hpp"
#include "hairsim/cage.hpp"
#include "hairsim/pbd.hpp"
#include "hairsim/decomposition.hpp"
#include "hairsim/io.hpp"
#include "hairsim/engine.hpp"
