from form_group_testing.testing import mock_get_current_span, span_exporter
