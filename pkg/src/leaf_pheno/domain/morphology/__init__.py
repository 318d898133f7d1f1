"""Binary-image primitives shared by segmentation and trait extraction."""
from .components import (Contour, chain_length, connected_components, densify, fill_interior,
                         largest_component, trace_outer_contour)
from .geometry import Ellipse, Hull, RotatedRect, convex_hull, feret_diameters, fit_ellipse_moments, min_area_rect
from .skeleton import Skeleton, distance_transform, skeletonize, step_lengths
