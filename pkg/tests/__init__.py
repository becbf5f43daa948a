# 测试包 