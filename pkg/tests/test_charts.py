from charts import line_chart


class TestLineChart:
    def test_svg_is_deterministic(self, tmp_path):
        paths = [tmp_path / "a.svg", tmp_path / "b.svg"]
        for path in paths:
            line_chart(str(path), [0.0, 0.1, 0.2], {"p=1": [1.0, 0.9, 0.7], "p=3": [1.0, 0.95, 0.85]},
                       title="rho=0", xlabel="sigma", ylabel="TNR")
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert b"<svg" in paths[0].read_bytes()

    def test_step_chart_is_deterministic_and_differs_from_polyline(self, tmp_path):
        x, series = [1, 2, 3, 4], {"p=3": [0.9, 0.9, 0.9, 0.4]}
        for name in ("a", "b"):
            line_chart(str(tmp_path / f"{name}.svg"), x, series, steps=True)
        line_chart(str(tmp_path / "plain.svg"), x, series)
        step = (tmp_path / "a.svg").read_bytes()
        assert step == (tmp_path / "b.svg").read_bytes()
        assert step != (tmp_path / "plain.svg").read_bytes()
