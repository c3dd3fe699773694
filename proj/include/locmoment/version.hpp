#pragma once

#define LOCMOMENT_VERSION "0.1.0"
