#pragma once

#include "locmoment/birman_schwinger.hpp"
#include "locmoment/correlators.hpp"
#include "locmoment/criterion.hpp"
#include "locmoment/harness.hpp"
#include "locmoment/hilbert.hpp"
#include "locmoment/model.hpp"
#include "locmoment/moments.hpp"
#include "locmoment/resolvent.hpp"
#include "locmoment/spectra.hpp"
#include "locmoment/spectral.hpp"
#include "locmoment/version.hpp"
