"""命令行前端：配置加载、批量运行、实验与报告。"""
