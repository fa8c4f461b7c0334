#pragma once

#include "sublocal/errors.hpp"
#include "sublocal/quadrature.hpp"
#include "sublocal/modegrid.hpp"
#include "sublocal/sources.hpp"
#include "sublocal/commutator.hpp"
#include "sublocal/magnus.hpp"
#include "sublocal/fock.hpp"
#include "sublocal/branches.hpp"
#include "sublocal/kgoracle.hpp"
#include "sublocal/config.hpp"
